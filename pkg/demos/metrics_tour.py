"""The task metrics on small hand-checked inputs.

Run: python demos/metrics_tour.py
"""
from __future__ import annotations

from promptevo.metrics import accuracy, mcc, mcc_from_counts, rouge_avg, token_f1

golds = ["pos", "neg", "pos", "neg"]
preds = ["pos", "neg", "neg", None]  # None: nothing parseable in the reply
print("accuracy", accuracy(preds, golds))
print("mcc     ", round(mcc(preds, golds, positive="pos"), 4))
print("mcc from counts tp=50 tn=40 fp=10 fn=0:", round(mcc_from_counts(50, 40, 10, 0), 4))
print("token f1", round(token_f1(["the Eiffel Tower"], ["Eiffel Tower, Paris"]), 4))
print("rouge   ", round(rouge_avg(["the cat sat on a mat"], ["the cat sat on the mat"]), 4))
