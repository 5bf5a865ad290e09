"""mpsbench: MPS circuit emulator plus a benchmarking, autotuning and ranking toolkit."""

__version__ = "0.1.0"
