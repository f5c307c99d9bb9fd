from .utils import FrozenDict

# Which RoIs receive mask-branch supervision
SupervisionModes = FrozenDict(
    FULL="full",
    PARTIAL="partial",
    FEWSHOT="fewshot"
)

# Softmax axis of the affinity matrix
NormalizeModes = FrozenDict(
    ROW="row",
    GLOBAL="global"
)

# Category split an annotation belongs to
Splits = FrozenDict(
    BASE="base",
    NOVEL="novel",
    ALL="all"
)

# Image subset within a generated dataset
Subsets = FrozenDict(
    TRAIN="train",
    VAL="val"
)

ShapeCategories = FrozenDict(
    SQUARE="square",
    CIRCLE="circle",
    TRIANGLE="triangle",
    PENTAGON="pentagon",
    STAR="star",
    ELLIPSE="ellipse"
)

TextureKinds = FrozenDict(
    STRIPES="stripes",
    DOTS="dots",
    NOISE_TINT="noise_tint",
    GRADIENT="gradient"
)

HeatmapKinds = FrozenDict(
    BOUNDARY="boundary",
    AFFINITY="affinity",
    OVERLAY="overlay"
)

# Ablation rows: name -> module flags
AblationVariants = FrozenDict(
    baseline=FrozenDict(use_boundary=False, use_fusion=True, use_affinity=False, use_affinity_loss=True),
    bm=FrozenDict(use_boundary=True, use_fusion=True, use_affinity=False, use_affinity_loss=True),
    am=FrozenDict(use_boundary=False, use_fusion=True, use_affinity=True, use_affinity_loss=True),
    both=FrozenDict(use_boundary=True, use_fusion=True, use_affinity=True, use_affinity_loss=True),
)

ExtendedAblationVariants = FrozenDict(
    bm_no_ff=FrozenDict(use_boundary=True, use_fusion=False, use_affinity=False, use_affinity_loss=True),
    am_no_al=FrozenDict(use_boundary=False, use_fusion=True, use_affinity=True, use_affinity_loss=False),
)

AblationLabels = FrozenDict(
    baseline="Baseline",
    bm="Baseline + BM",
    am="Baseline + AM",
    both="Baseline + BM + AM",
    bm_no_ff="Baseline + BM w/o FF",
    am_no_al="Baseline + AM w/o AL",
)
