from .actors import MULTI_IN_ONE, ONE_IN_ONE, TRANSFERS, Budget, Master, Supervisor, Timer, Worker
from .messages import (Kind, Message, ProtocolError, decode_frame, encode_frame, id_width,
                       transfer_cost)
from .sim import HeterogeneityModel, RunConfig, RunMetrics, Simulation, Topology, run_experiment

__all__ = [
    "MULTI_IN_ONE", "ONE_IN_ONE", "TRANSFERS", "Budget", "Master", "Supervisor", "Timer", "Worker",
    "Kind", "Message", "ProtocolError", "decode_frame", "encode_frame", "id_width", "transfer_cost",
    "HeterogeneityModel", "RunConfig", "RunMetrics", "Simulation", "Topology", "run_experiment",
]
