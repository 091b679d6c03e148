"""
Evaluation metrics
==================

F-measure against binary user summaries and rank correlation against
importance curves, plus the leave-one-out human baseline.
"""

# %%
import numpy as np

from vjmht.evaluation import f_measure, f_measure_multi, human_baseline, kendall_tau, spearman_rho

# %% Precision 0.5, recall 0.25
pred = np.zeros(40, dtype=int)
pred[:10] = 1
gt = np.zeros(40, dtype=int)
gt[5:25] = 1
print("P, R, F =", f_measure(pred, gt))

# %% Two annotators: best match versus average
other = np.zeros(40, dtype=int)
other[:10] = 1
print("max over annotators ", f_measure_multi(pred, [gt, other], "max"))
print("mean over annotators", f_measure_multi(pred, [gt, other], "mean"))

# %% Piecewise-constant predictions are full of ties, which tau-b accounts for
scores = np.repeat([0.1, 0.9, 0.4], [5, 3, 4])
truth = np.linspace(0, 1, 12) ** 2
print("tau", kendall_tau(scores, truth), "rho", spearman_rho(scores, truth))

# %% Agreement among three simulated annotators
rng = np.random.default_rng(3)
base = rng.uniform(size=30)
annotators = [np.round(5 * np.clip(base + rng.normal(0, 0.2, 30), 0, 1)) for _ in range(3)]
print("human baseline (tau, rho):", human_baseline(annotators))
