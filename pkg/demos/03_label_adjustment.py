"""Repair 30% symmetric label noise with difficult-prototype similarity.

Each sample is relabeled with the class whose difficult prototypes it is
most similar to on average. On the planted benchmark this recovers the
clean labels for nearly all cluster members.
"""

import numpy as np

from protoclf import (
    SynthSpec,
    TrainConfig,
    adjust_labels,
    generate,
    planted_anomaly_ids,
    preliminary_train,
)
from protoclf.prototypes import select_prototypes

for seed in range(3):
    spec = SynthSpec(seed=seed)
    ds = generate(spec)
    ds = ds.with_logits(preliminary_train(ds, TrainConfig(seed=seed)))
    protos = select_prototypes(ds)
    adj = adjust_labels(ds, protos)

    noisy_acc = (ds.noisy_labels == ds.clean_labels).mean()
    mask = np.ones(ds.n, bool)
    mask[planted_anomaly_ids(spec)] = False
    adj_acc = (adj.adjusted[mask] == ds.clean_labels[mask]).mean()
    repaired = ((ds.noisy_labels != ds.clean_labels) & (adj.adjusted == ds.clean_labels)).sum()
    broken = ((ds.noisy_labels == ds.clean_labels) & (adj.adjusted != ds.clean_labels)).sum()
    print(
        f"seed {seed}: noisy label accuracy {noisy_acc:.3f} -> adjusted "
        f"{adj_acc:.3f} on cluster members ({repaired} repaired, {broken} newly wrong, "
        f"{int(adj.changed.sum())} changed)"
    )
