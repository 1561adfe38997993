"""Train a small distance network and watch the validation RF.

Desk-scale version of the training protocol: Adam with cosine decay, MAE on
patristic targets, per-epoch validation through the full forward -> NJ -> RF
pipeline, and early stopping on the validation score.
"""

import numpy as np

from phylodist import BDParams, SubstModel, build_architecture, evolve_alignment, simulate_bd_tree
from phylodist.train import TrainConfig, train, training_targets, validation_rf

N_TAXA, LENGTH = 8, 150
spec = build_architecture(
    "SitesInvariantS", channels=16, heads=2, embed_dim=8, n_taxa=N_TAXA, seed=0
)
print(f"architecture: {spec.architecture} ({spec.param_count()} trainable parameters)")

train_data, val_data = [], []
for s in range(24):
    tree = simulate_bd_tree(BDParams(1.0, 0.5, N_TAXA), seed=s)
    aln = evolve_alignment(tree, SubstModel("JC"), LENGTH, seed=s)
    if s < 16:
        train_data.append((aln, training_targets(spec, tree, aln.labels)))
    else:
        val_data.append((aln, tree))

baseline = validation_rf(spec, val_data)
print(f"validation RF before training: {baseline:.4f}")

cfg = TrainConfig(learning_rate=0.01, max_epochs=15, batch_size=4, patience=6, seed=0)
result = train(spec, train_data, cfg, val_data=val_data)

for row in result.history:
    print(
        f"epoch {row['epoch']:2d}  loss {row['train_loss']:.4f}  "
        f"val RF {row['val_rf']:.4f}  lr {row['lr']:.5f}"
    )
print(f"best epoch {result.best_epoch} with validation RF {result.best_val_rf:.4f}")
print(f"restored-weights validation RF: {validation_rf(spec, val_data):.4f}")
