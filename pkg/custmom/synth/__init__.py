from .generator import DGPConfig, SyntheticMarket, emit, generate
