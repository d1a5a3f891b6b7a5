"""
Scoring predictions
===================

Detection predictions are masks scored with IoU and Dice; enhancement
predictions are images scored against the clean image with SSIM, PSNR,
correlation and SNR. The dynamic range for PSNR and SSIM comes from the
reference image.
"""
import numpy as np

from chimneysim import enh_scores, seg_scores

rng = np.random.default_rng(0)
truth = np.zeros((64, 64), bool)
truth[20:40, 25:35] = True
pred = np.roll(truth, 3, axis=1)
s = seg_scores(pred, truth)
print(f"shifted mask: iou {s.iou:.3f}, dice {s.dice:.3f}, "
      f"2iou/(1+iou) {2 * s.iou / (1 + s.iou):.3f}")

clean = rng.standard_normal((64, 64)).cumsum(axis=0)
for label, p in [("identity", clean), ("noisy", clean + rng.normal(0, 0.5, clean.shape)),
                 ("offset", clean + 0.25), ("negated", -(clean - clean.mean()))]:
    e = enh_scores(p, clean)
    print(f"{label:9s} " + ", ".join(f"{k} {v:.3f}" for k, v in e.to_dict().items()))

# restrict the scores to the chimney region
print("inside mask:", enh_scores(clean + 0.1, clean, mask=truth).to_dict())
