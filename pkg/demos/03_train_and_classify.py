"""Classifier walkthrough.

Builds a small in-memory dataset, trains the least-squares SVM on the
feature vectors of three synthetic patients, and scores the superpixels of
two held-out patients: per-superpixel accuracy plus the one-positive-flags-
the-frame decision rule.

Run:  python demos/03_train_and_classify.py
"""

import numpy as np

from polypseg import SlicParams, segment
from polypseg.evaluation import frame_decision, frame_metrics, label_superpixel
from polypseg.features import assemble, compute_source_planes, regions_from_labels
from polypseg.lssvm import NORMAL, POLYP, TrainConfig, fit, predict_labels
from polypseg.synth import generate_frame

SIZE, K, N_FRAMES, N_PATIENTS = 256, 49, 16, 4


def extract(frame, truth):
    lm = segment(frame, SlicParams(k=K))
    planes = compute_source_planes(frame)
    vecs, labels = [], []
    for region in regions_from_labels(lm):
        vecs.append(assemble(frame, lm, region, planes=planes).values)
        labels.append(label_superpixel(region, truth))
    return np.vstack(vecs), np.array(labels)


def main():
    rng = np.random.default_rng(123)
    per_patient = {p: [] for p in range(N_PATIENTS)}
    for i in range(N_FRAMES):
        frame, truth, _ = generate_frame(rng, size=SIZE)
        per_patient[i % N_PATIENTS].append(extract(frame, truth) + (bool(truth.mask.any()),))

    train_x = np.vstack([x for p in (0, 1) for x, _, _ in per_patient[p]])
    train_y = np.concatenate([y for p in (0, 1) for _, y, _ in per_patient[p]])
    print(f"training on patients 0-1: {len(train_y)} superpixels, "
          f"{int(np.sum(train_y == POLYP))} polyp / {int(np.sum(train_y == NORMAL))} normal")

    model = fit(train_x, train_y, TrainConfig())
    print(f"solver residual: {model.residual:.2e}")

    decisions, truths, correct, total = [], [], 0, 0
    for p in (2, 3):
        for x, y, has_polyp in per_patient[p]:
            pred = predict_labels(model, x)
            correct += int(np.sum(pred == y))
            total += len(y)
            decisions.append(frame_decision(pred))
            truths.append(POLYP if has_polyp else NORMAL)

    print(f"\nheld-out patients 2-3: superpixel accuracy {correct / total:.3f}")
    rep = frame_metrics(decisions, truths)
    print(f"frame-level: tp={rep.counts.tp} fp={rep.counts.fp} fn={rep.counts.fn} tn={rep.counts.tn}")
    fmt = lambda v: "undefined" if v is None else f"{v:.3f}"
    print(f"sensitivity={fmt(rep.sensitivity)} specificity={fmt(rep.specificity)} "
          f"accuracy={fmt(rep.accuracy)} precision={fmt(rep.precision)}")


if __name__ == "__main__":
    main()
