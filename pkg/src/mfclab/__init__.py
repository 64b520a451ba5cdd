"""Networked model-free control laboratory.

An intelligent-proportional controller served over a lossy UDP-style link
against simulated plants (single tank, half-quadrotor surrogate), with a
scenario catalog covering scheduled outages, Bernoulli packet loss, a PI
baseline, and a joystick-steered mode.
"""

from .controllers import (ControllerState, PiState, SampleWindow,
                          UltraLocalConfig, estimate_f_algebraic,
                          estimate_f_closedloop, ip_control, pi_control)
from .kernels import BACKEND as KERNEL_BACKEND
from .link import (Datagram, Direction, LinkEmulator, LossModel, StaleGuard,
                   decode, encode, loss_gate, stale_check)
from .loop import LoopSession, TickClock, TraceRecord, run_loop
from .plants import (AeroParams, AeroSurrogateState, JoystickFilterState,
                     TankParams, TankState, aero_step, aero_voltage_map,
                     joystick_filter_step, sample_noise, schedule_value,
                     tank_step)
from .scenarios import (CATALOG, RunMetrics, ScenarioSpec, build_scenario,
                        build_session, evaluate, export_csv, export_summary,
                        run_scenario, scenario_names)

__version__ = "0.1.0"
