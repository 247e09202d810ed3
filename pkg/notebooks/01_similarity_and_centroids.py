"""
Similarity, proxies and leave-one-out centroids
===============================================

The building blocks every loss in the package shares.
"""

import numpy as np

from proxyforge.embedding import Minibatch, SimilarityParams, init_proxies, l2_normalize, scaled_cosine

# Embeddings live on the unit sphere; raw vectors are normalized on use.
u = l2_normalize([3.0, 4.0])
print("normalize(3, 4) =", u)

# The learnable similarity is alpha * (cos - beta).  At the starting values
# alpha=10, beta=0.1 a vector compared with itself scores 9.
params = SimilarityParams(alpha=10.0, beta=0.1)
print("s(u, u)  =", scaled_cosine(u, u, params))
print("s(u, u') =", scaled_cosine(u, l2_normalize([-4.0, 3.0]), params), "(orthogonal)")

# One proxy per class, drawn uniformly on the sphere.
proxies = init_proxies(num_classes=5, dim=8, seed=42)
print("proxy norms:", np.linalg.norm(proxies.proxies, axis=1).round(12))

# %%
# A minibatch reserves one query per class; the class centroid averages the
# remaining instances and is re-normalized.
x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0],    # class 0, query = (0, 1)
              [0.0, -1.0], [0.1, -1.0]])              # class 1, query = first
batch = Minibatch(x, labels=np.array([0, 0, 0, 1, 1]), query_indices=np.array([1, 3]))
print("classes in query order:", batch.classes)
print("centroids:\n", batch.centroids.round(4))
