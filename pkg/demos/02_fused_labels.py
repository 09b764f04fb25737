# %% [markdown]
# # How scaling factors steer the fused assignment
#
# The fused representation concatenates each view's embedding multiplied by
# its factor ``w``.  The squared distance to a fused centroid is then the
# ``w^2``-weighted sum of per-view distances, so views with larger factors
# have more say.  This script builds small witnesses by hand.

# %%
import numpy as np

from mvcan import verification as vf

rng = np.random.default_rng(0)

# %% [markdown]
# Two informative views that disagree.  View A prefers cluster 1, view B
# prefers cluster 0.  The crossover happens at the ratio ``delta``.

# %%
view_a = vf.informative_view(rng, k=2, d=3, nearest=1)
view_b = vf.informative_view(rng, k=2, d=3, nearest=0)
delta = vf.threshold_delta(view_a, view_b)
print(f"delta = {delta:.4f}")

zs, mus = [view_a[0], view_b[0]], [view_a[1], view_b[1]]
for ratio in (0.5 * delta, 0.999 * delta, 1.001 * delta, 2 * delta):
    y = vf.fused_soft_labels(zs, mus, [np.sqrt(ratio), 1.0])
    print(f"(w_a / w_b)^2 = {ratio:8.4f}  ->  fused cluster {int(np.argmax(y))}  y = {np.round(y, 4)}")

# %% [markdown]
# A noisy view sits at (almost) the same distance from every centroid, so it
# barely moves the fused distances whatever its factor.

# %%
inf = vf.informative_view(rng, k=4, d=2, nearest=3)
noisy = vf.noisy_view(rng, k=4, d=5, eps=1e-6)
print("noisy view distances:", np.round(vf.distances(*noisy), 8))
for w_noise in (1.0, np.e, 100.0):
    y = vf.fused_soft_labels([inf[0], noisy[0]], [inf[1], noisy[1]], [1.0, w_noise])
    print(f"w_noise = {w_noise:7.3f}  ->  fused cluster {int(np.argmax(y))}")

# %% [markdown]
# The campaigns repeat such constructions many times with random sizes.

# %%
for rep in vf.run_campaigns(["3", "4", "5"], trials=200, seed=0):
    print(rep.to_text())
