"""Optimize channels on a small image grid and score them by AUC against the FK solution."""

from grassopt import fukunaga_koontz, jeffreys
from grassopt.config import preset
from grassopt.experiments import evaluate_point, evaluation_images, optimize_seed
from grassopt.simulate import true_stats

cfg = preset("table2", seeds=[0])
truth = true_stats(cfg.grid)
images = evaluation_images(truth, cfg.test_per_class, 0)
fk = fukunaga_koontz(truth, cfg.p).t_star
x, _ = optimize_seed(cfg, 0, truth)
for name, point in [("FK", fk), ("RiGD-LS", x)]:
    report = evaluate_point(cfg, point, 0, truth, images)[0]
    print(f"{name:8s} J={jeffreys(truth, point):.3f}  AUC={report['auc']:.3f}")
