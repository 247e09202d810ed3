"""
Counting comparisons per epoch
==============================

Every similarity or distance evaluation is counted while a real epoch runs.
MP/MMP grow linearly in the dataset size N and (affinely) in the number of
proxies P; exhaustive triplet enumeration grows cubically.
"""

from proxyforge.complexity import count_epoch_comparisons, fit_scaling

r = count_epoch_comparisons("mp", 20, 8, 10, 2)
print(f"mp, N=20 B=8 P=10 M=2: counted {r.count}, predicted {r.predicted}")

grids = [
    ("mp", {"param": "N", "values": [128, 256, 512, 1024], "fixed": {"B": 8, "P": 16, "M": 2}}),
    ("mmp", {"param": "P", "values": [32, 64, 128, 256], "fixed": {"N": 2560, "B": 8, "M": 2}}),
    ("prototypical", {"param": "N", "values": [128, 256, 512, 1024], "fixed": {"B": 8, "P": 16, "M": 2}}),
    ("triplet", {"param": "N", "values": [16, 24, 32, 48, 60], "fixed": {"P": 2}, "full_batch": True}),
]
for loss, grid in grids:
    rep = fit_scaling(loss, grid)
    print(f"{loss:<13} vs {rep.param}: counts {list(rep.counts)}  slope {rep.slope:.3f}")
