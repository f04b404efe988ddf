"""Dynamic-object removal and static road-layout reconstruction for label maps."""

from .taxonomy import ClassTaxonomy, ClassDef, TaxonomyError, get_taxonomy, load_taxonomy
from .labelmap import (PairedSample, ShapeError, remap_labels, encode_one_hot, decode_argmax,
                       extract_dynamic_mask, sample_training_crop, compose_inpainted)
from .classic import DiffusionParams, NsResult, inpaint_nn, inpaint_navier_stokes
from .patchmatch import PatchParams, NnfField, patch_distance, nnf_iterate, inpaint_patchmatch
from .synth import (SceneSpec, SynthConfig, generate_scene_pair, apply_drift, align_correct,
                    build_dataset, read_manifest, load_sample)
from .evalkit import masked_accuracy, confusion_matrix, evaluate_dataset, render_report
from .engines import run_engine

__version__ = "0.1.0"
