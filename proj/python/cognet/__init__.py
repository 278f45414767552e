"""Python interface to the cognet medication recommender."""

from ._cognet import (
    CodeVocabulary,
    DatasetBundle,
    DivergenceError,
    EpochLog,
    ModelConfig,
    PatientRecord,
    Recommender,
    TrainConfig,
    ValidationError,
    Visit,
    build_ehr_graph,
    corpus_statistics,
    ddi_adjacency,
    generate_synthetic_cohort,
    histogram,
    load_ddi_adjacency,
    order_medications,
    read_dataset,
    split_dataset,
    synthetic_ddi_pairs,
    visit_ddi_rate,
    visit_f1,
    visit_jaccard,
    write_dataset,
)

LABEL_ORDERS = ("rare_first", "frequent_first", "early_first", "late_first")
ABLATIONS = ("copy", "visit_scores", "graphs", "diagnoses", "procedures")


def synthetic_dataset(patients, persistence, seed, order="rare_first", ddi_pairs=40):
    """Generated cohort split 2/3 : 1/6 : 1/6, plus its DDI adjacency."""
    bundle = split_dataset(generate_synthetic_cohort(patients, persistence, seed), seed=seed)
    bundle = order_medications(bundle, order)
    ddi = ddi_adjacency(synthetic_ddi_pairs(bundle.medications, ddi_pairs, seed), bundle.medications)
    return bundle, ddi


__all__ = [name for name in dir() if not name.startswith("_")]
