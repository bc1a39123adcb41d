from voluptuous import All, Any, Coerce, Length, Optional, Range, Schema, ALLOW_EXTRA

from neuroaps.api.dataclasses import DEFAULT_RATIOS

__all__ = ["CONFIG_SCHEMA"]

"""
================================================================================
SCHEMA: Validação do config.yaml
================================================================================
Cada seção do config.yaml é validada com voluptuous. Chaves ausentes recebem
os valores padrão do pipeline; chaves extras são preservadas.
"""

_positive = All(Coerce(float), Range(min=0, min_included=False))
_fraction = All(Coerce(float), Range(min=0, max=1))

PHANTOM_SCHEMA = Schema({
    Optional("image_size", default=128): All(Coerce(int), Range(min=1)),
    Optional("count_per_class", default=100): All(Coerce(int), Range(min=5)),
    Optional("split_fraction", default=0.8): All(Coerce(float), Range(min=0, max=1, min_included=False, max_included=False)),
    Optional("ventricle_scale_ad", default=1.6): _positive,
    Optional("ventricle_scale_cn", default=1.0): _positive,
    Optional("hippocampus_scale_ad", default=0.6): _positive,
    Optional("hippocampus_scale_cn", default=1.0): _positive,
    Optional("noise_sigma", default=0.05): All(Coerce(float), Range(min=0)),
    Optional("surface_thickness", default=2): All(Coerce(int), Range(min=1)),
    Optional("shape_jitter", default=0.08): _fraction,
    Optional("seed", default=0): Coerce(int),
}, extra=ALLOW_EXTRA)

PREPROCESS_SCHEMA = Schema({
    Optional("threshold", default=0.1): All(Coerce(float), Range(min=0, max=1, min_included=False, max_included=False)),
    Optional("closing_radius", default=2): All(Coerce(int), Range(min=0)),
}, extra=ALLOW_EXTRA)

SAMPLING_SCHEMA = Schema({
    Optional("ratios", default=list(DEFAULT_RATIOS)): All([_fraction], Length(min=4, max=4)),
    Optional("points", default=2048): All(Coerce(int), Any(2048, 4096, 8192)),
    Optional("seed", default=0): Coerce(int),
}, extra=ALLOW_EXTRA)

MODEL_SCHEMA = Schema({
    Optional("encoder_dims", default=[64, 128, 256]): [Coerce(int)],
    Optional("fusion_dim", default=256): Coerce(int),
    Optional("head_dims", default=[512, 128, 2]): [Coerce(int)],
    Optional("init_seed", default=0): Coerce(int),
    Optional("dtype", default="float32"): Any("float32", "float64"),
}, extra=ALLOW_EXTRA)

TRAIN_SCHEMA = Schema({
    Optional("learning_rate", default=1e-3): All(Coerce(float), Range(min=0)),
    Optional("epochs", default=30): All(Coerce(int), Range(min=0)),
    Optional("batch_size", default=16): All(Coerce(int), Range(min=1)),
    Optional("jitter_sigma", default=0.01): All(Coerce(float), Range(min=0)),
    Optional("dropout_fraction", default=0.1): All(Coerce(float), Range(min=0, max=1, max_included=False)),
    Optional("seed", default=0): Coerce(int),
}, extra=ALLOW_EXTRA)

BENCH_SCHEMA = Schema({
    Optional("warmup", default=5): All(Coerce(int), Range(min=3)),
    Optional("reps", default=50): All(Coerce(int), Range(min=20)),
    Optional("point_counts", default=[2048, 4096, 8192]): [All(Coerce(int), Any(2048, 4096, 8192))],
    Optional("ablation_points", default=8192): All(Coerce(int), Range(min=1)),
    Optional("seeds", default=[0, 1, 2]): [Coerce(int)],
    Optional("workers", default=1): All(Coerce(int), Range(min=1)),
}, extra=ALLOW_EXTRA)

CONFIG_SCHEMA = Schema({
    Optional("name", default="NeuroAPS"): str,
    Optional("version", default="1.0.0"): Coerce(str),
    Optional("phantom", default={}): PHANTOM_SCHEMA,
    Optional("preprocess", default={}): PREPROCESS_SCHEMA,
    Optional("sampling", default={}): SAMPLING_SCHEMA,
    Optional("model", default={}): MODEL_SCHEMA,
    Optional("train", default={}): TRAIN_SCHEMA,
    Optional("bench", default={}): BENCH_SCHEMA,
}, extra=ALLOW_EXTRA)
