"""Walk through one job end to end: greedy fill, externalities, payments.

Three workers bid (1, 2, 3) with caps (0.5, 0.6931, 1.0).  The cheapest two
cover the job; the payment rule then prices what each winner displaced.

Run from the repository root:  python3 demos/02_allocation_and_payments.py
"""

import numpy as np

from crowdmarket import (
    FrozenInstance,
    delta_separation,
    deviation_sweep,
    job_payments,
    sw_greedy,
)


def main() -> None:
    bids = np.array([1.0, 2.0, 3.0])
    caps = np.array([0.5, 0.6931, 1.0])
    c_bar = 3.0

    alloc = sw_greedy(bids, caps)
    print("bids:", bids, " caps:", caps)
    print(f"greedy fractions: {alloc.fractions}  (sum {alloc.fractions.sum()})")
    print(f"boundary worker k_bar = {alloc.k_bar}, cost = {bids @ alloc.fractions:.4f}")
    print(f"slack left on the boundary worker: {delta_separation(alloc, caps):.4f}")

    rec = job_payments(alloc, caps, bids, c_bar)
    print("\nexternality table (row: absent worker, col: absorber):")
    for i in range(3):
        print(f"  worker {i}: {np.round(rec.externality[i], 4)}")
    print("payments: ", np.round(rec.payments, 4))
    print("utilities:", np.round(rec.utilities, 4))
    print("worker 0 is paid 0.1931 at bid 2 plus 0.3069 at bid 3: "
          f"{0.1931 * 2 + 0.3069 * 3:.4f}")

    # why lying does not pay: sweep every unilateral deviation
    inst = FrozenInstance(costs=bids, caps=caps, cost_bounds=(1.0, 3.0))
    print("\nbest achievable gain from misreporting, per worker:")
    for i in range(3):
        print(f"  worker {i}: {deviation_sweep(inst, i):+.2e}")

    # the classic trap: worker 2 undercuts worker 1 and wins half the job
    shaded = bids.copy()
    shaded[2] = 1.5
    alloc2 = sw_greedy(shaded, caps)
    rec2 = job_payments(alloc2, caps, shaded, c_bar, true_costs=bids)
    print("\nif worker 2 (cost 3) undercuts to 1.5:")
    print(f"  it wins {alloc2.fractions[2]:.2f} of the job,"
          f" is paid {rec2.payments[2]:.2f},"
          f" and nets {rec2.utilities[2]:+.2f}")


if __name__ == "__main__":
    main()
