"""
Checking the hand-derived gradients
===================================

Every loss returns analytic gradients with respect to the raw embeddings,
the raw proxies, alpha and beta.  Here they are compared with central
finite differences on random batches.
"""

import time

from proxyforge.losses import LOSS_NAMES
from proxyforge.losses.gradcheck import check_gradients, finite_difference_gradient

# sanity check of the numerical side: d/dx x^2 at x=1
print("d(x^2)/dx at 1 ~", float(finite_difference_gradient(lambda d: d["x"] ** 2, {"x": 1.0}, 1e-4)["x"]))

start = time.perf_counter()
for name in LOSS_NAMES:
    report = check_gradients(name, seed=0, trials=5)
    print(f"{name:<22}", "  ".join(f"{k}={v:.1e}" for k, v in report.items()))
print(f"done in {time.perf_counter() - start:.1f}s")
