"""Select difficult and anomaly prototypes and inspect what got picked.

A short preliminary fit provides logits; confidence (margin of the scaled
logits), proximity (thresholded neighbour count) and pairwise similarity
then drive the per-class selection. Anomaly prototypes should land on the
planted far-shell members.
"""

from protoclf import SynthSpec, TrainConfig, generate, planted_anomaly_ids, preliminary_train
from protoclf.metrics import compute_class_metrics
from protoclf.prototypes import select_prototypes

spec = SynthSpec(seed=0)
ds = generate(spec)
ds = ds.with_logits(preliminary_train(ds, TrainConfig(seed=0)))

protos = select_prototypes(ds)
planted = set(planted_anomaly_ids(spec).tolist())

for c in range(ds.classes):
    cm = compute_class_metrics(ds, c)
    pos = {int(i): j for j, i in enumerate(cm.indices)}
    print(f"\nclass {c}: pool size {len(cm.indices)}, s_c = {cm.s_c:.3f}")
    for kind, ids in (("difficult", protos.difficult[c]), ("anomaly", protos.anomaly[c])):
        rows = []
        for i in ids:
            j = pos[i]
            tag = "planted-anomaly" if i in planted else f"cluster-{ds.clean_labels[i]}"
            rows.append(f"    id {i:3d}  conf {cm.confidence[j]:.3f}  "
                        f"prox {cm.proximity[j]:4d}  ({tag})")
        print(f"  {kind} prototypes:")
        print("\n".join(rows))

first_planted = [protos.anomaly[c][0] in planted for c in range(ds.classes)]
print(f"\nfirst-round anomaly prototypes planted: {first_planted}")
