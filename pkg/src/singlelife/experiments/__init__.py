"""Desk-scale study replications: life size, non-life controls, pairing
ablation, masking/Jaccard sweep."""

from .studies import (STUDIES, StudySpec, cell_key, load_study_spec,
                      reference_checkpoint, run_cell, run_study, study_life_size,
                      study_nonlife_control, study_pairing_ablation, study_sweep,
                      study_testset, summarize, train_tagged)

__all__ = [
    "STUDIES", "StudySpec", "cell_key", "load_study_spec", "reference_checkpoint",
    "run_cell", "run_study", "study_life_size", "study_nonlife_control",
    "study_pairing_ablation", "study_sweep", "study_testset", "summarize",
    "train_tagged",
]
