HELP_SYNTH = """
## synth

regretobserver synth --system NN4 --method regret --horizon 10 --ts 0.005 --out maps.json
    Synthesize one observer and write its error maps, gains and objective.
    --method     h2 | hinf | clairvoyant | regret
    --system     catalog name or path to a .sys file
    --euler      forward-Euler discretization instead of zero-order hold
"""

HELP_EVAL = """
## eval

regretobserver eval --maps maps.json --pattern gaussian --realizations 1000 --seed 0
    Average quadratic error ‖Qe‖² of stored maps under one disturbance pattern,
    plus the H2 and H∞ costs of the maps. The problem is rebuilt from the
    settings saved next to the maps.
"""

HELP_BENCH = """
## bench

regretobserver bench --system NN4 --format markdown --out nn4.md
regretobserver bench --system AC1,AC2,AC3 --format csv --out ac.csv
    Synthesize H2, H∞ and minimal-regret observers and compare their average
    costs over all disturbance patterns. Several systems separated by commas
    are averaged into one table (mean relative percentage per cell).
    --format     csv | json | markdown
"""

HELP_SELFTEST = """
## selftest

regretobserver selftest
    Oracle and invariant checks: closed-form scalar observers, SDP solver
    oracles, achievability and simulation equivalence on random systems,
    Kalman structure of the H2 observer.
"""

HELP_CONFIG = """
## Configuration

Every op accepts --config FILE with flat `key = value` lines (`#` starts a
comment) and repeated --set key=value. Flags override --set, --set overrides
the file. Keys:

    system, ts, horizon, discretization, patterns, waveform_clock, realizations,
    seed, hv, hw, sigma_v, sigma_w, q, workers, max_newton, sdp_trace
"""

HELP_EXIT_CODES = """
## Exit codes

    0  success
    2  solver failure (infeasible LMI, iteration limit, singular factor)
    3  bad input (dimensions, unknown system or pattern, malformed files)
"""

HELP_HELP = """
## help

regretobserver help
    This text. Add --verbose before the op for debug logging.
"""

HELP = "Help:\n" + HELP_SYNTH + HELP_EVAL + HELP_BENCH + HELP_SELFTEST + HELP_HELP + HELP_CONFIG + HELP_EXIT_CODES
