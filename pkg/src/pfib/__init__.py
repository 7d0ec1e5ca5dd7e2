"""Prime Fibonacci sequences: generation, extension, search, diagnostics.

The forward recurrence takes two odd primes and repeatedly appends the
smallest odd prime divisor of the last pairwise sum, stopping when that sum
is a power of two.  This package generates such sequences, extends them to
the left (congruence-based and minimal variants), reproduces the reversed
sequence OEIS A255562 with a bounded, parallel, checkpoint-resumable search,
builds length-k sequences from prime arithmetic progressions, and reports
growth diagnostics.
"""

from .arith import (
    CrtSystem,
    crt_solve,
    ensure_odd_prime,
    factorize,
    is_power_of_two,
    is_prime,
    is_rough,
    odd_part,
    odd_primorial,
    sieve_primes,
    smallest_odd_prime_divisor,
)
from .searchctl import (
    Checkpoint,
    CheckpointError,
    SearchResult,
    SearchTask,
    load_checkpoint,
    run_search,
    save_checkpoint,
)
from .seqcore import (
    BoundExhaustedError,
    DegenerateSystemError,
    ForwardStatus,
    GROWTH_ROOT,
    GrowthReport,
    PfibSequence,
    PrimeAp,
    ReversedSequence,
    ReversedStatus,
    Seed,
    TripleCheck,
    extend_left_crt,
    extend_left_minimal,
    extend_left_minimal_naive,
    find_prime_ap,
    generate_forward,
    generate_reversed,
    green_tao_sequence,
    growth_diagnostics,
    index_recurrence,
)

__version__ = "0.1.0"
