"""How much does the tangent-line bound recover without finite-size effects?

Prints the key rate per pulse of the four methods along the fiber, then the
two pieces of the closed-form bound: the single-photon term at the
two-photon-model solution and the correction that carries the background
yield. The correction is negative at short range and turns positive near
the end of the range, where dark counts start to matter.
"""
from decoyqkd import ChannelParams, SourceParams, simulate_rates
from decoyqkd import asymptotic as asym
from decoyqkd.finite import ASYMPTOTIC_METHODS, asymptotic_rate, finite_max_distance

source = SourceParams()  # mu = 0.6, nu = 0.2, 6:1 selection

print(f"{'km':>5} " + " ".join(f"{m:>15}" for m in ASYMPTOTIC_METHODS))
for km in range(0, 301, 25):
    ch = ChannelParams(km)
    rates = [asymptotic_rate(m, source, ch, 1.06) for m in ASYMPTOTIC_METHODS]
    print(f"{km:>5} " + " ".join(f"{r:15.4e}" for r in rates))

print("\nmaximum distance without fluctuations (km)")
for m in ASYMPTOTIC_METHODS:
    print(f"  {m:>15}: {finite_max_distance(m, source, ChannelParams(), None, 1.06, 1e-10):.1f}")

print("\nsingle-photon term and correction at the two-photon-model solution")
for km in (0, 100, 200, 240, 250, 280):
    r = simulate_rates(source, ChannelParams(km))
    main, corr = asym.closed_form_terms(r, source)
    det = asym.correction_determinant(r, source)
    print(f"  {km:>4} km  main {main:.4e}  correction {corr:+.3e}  determinant {det:+.3e}")
