from .budget import PrivacyBudget, charge  # noqa: F401
from .extmem import AccessTrace, ExternalMemory, capture_trace  # noqa: F401
from .noise import LaplaceNoise, PrivacyParams, truncated_noise_vector  # noqa: F401
from .oprim import OramArray, oblivious_shuffle, oblivious_sort  # noqa: F401
from .queries import (  # noqa: F401
    Database,
    distinct_sort_odp,
    distinct_stream_odp,
    freq_oracle_build,
    freq_oracle_query,
    heavy_hitters_odp,
    histogram_odp,
    histogram_oram,
)
