"""How many neighborhood samples certify a tuned hyperparameter point?

If a fraction p of the neighborhood beats the base point, the chance that n
independent draws all miss it is (1-p)^n; requiring that to be below alpha
gives n >= ln(alpha)/ln(1-p). This script prints the closed forms, then runs
a deliberately small verification (loose p and alpha, so only 4 samples) on
a tiny model to show the full machinery: matched-seed training of base and
neighbors, ranking, and the artifact files.

Run: python3 demos/05_local_optimality_mini.py
"""
import tempfile

from mupt import (DIAG_HP, PTConfig, TrainSettings, encode_corpus, confidence,
                  hp_distance, min_samples, sample_size_bound, synth_text,
                  verify_local_optimality)

print("sample counts for 'no p-fraction improvement, confidence 1-alpha':")
for p, alpha in ((0.05, 0.05), (0.05, 0.01), (0.1, 0.05), (0.3, 0.3)):
    n = min_samples(p, alpha)
    print(f"  p={p:.2f} alpha={alpha:.2f}: bound {sample_size_bound(p, alpha):7.2f} "
          f"-> n={n:3d}, achieved confidence {confidence(n, p):.4f}")

# The miniature run: width 16, 4 neighborhood draws at radius 0.2.
config = PTConfig(width=16, rank=4, channels=2, topics=32, vocab_size=259,
                  pos_bias=False)
corpus = encode_corpus(synth_text(1 << 14, seed=13), seq_len=16)
settings = TrainSettings(steps=20, batch_size=4, eval_interval=20,
                         mfvi_iters=2)
out_dir = tempfile.mkdtemp(prefix="mupt-verify-")
report = verify_local_optimality(config, DIAG_HP, corpus, seed=0,
                                 settings=settings, out_dir=out_dir,
                                 p=0.3, alpha=0.3, scale=0.2)

print(f"\nbase loss {report.base_loss:.4f} after {settings.steps} steps")
for i, (dist, loss) in enumerate(zip(report.distances, report.sample_losses), 1):
    mark = "better" if loss < report.base_loss else "worse"
    print(f"  neighbor {i}: distance {dist:.3f}, loss {loss:.4f} ({mark})")
print(report.summary())
print("note: 20 steps is far too short to have tuned anything; the point "
      "here is the mechanics, not the verdict")
print(f"\nartifacts in {out_dir}:")
for kind, path in sorted(report.artifacts.items()):
    print(f"  {kind}: {path}")
