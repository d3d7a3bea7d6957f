"""fedrecover: a deterministic federated-learning simulator where clients
counter label-distribution skew by synthesizing missing-class samples from a
style-gapped foundation generator, optionally corrected with locally
estimated gap transforms, then train and aggregate by weighted averaging."""

from .core import (
    Dataset,
    NumericsError,
    RngStream,
    Sample,
    concat_datasets,
    derive_stream,
    empty_dataset,
    load_dataset,
    save_dataset,
    standard_normal_vector,
)
from .federation import (
    ClientState,
    FedConfig,
    PersonalizationResult,
    aggregate,
    prepare_clients,
    run_generalization,
    run_personalization,
)
from .genmodel import (
    GapEstimate,
    Generator,
    adapt,
    estimate_gap,
    fit_foundation,
    plan_synthesis,
    synthesize,
    w2_to_global,
)
from .learner import (
    ModelParams,
    TrainConfig,
    ce_loss,
    forward,
    gradient,
    init_params,
    local_update,
    predict_proba,
)
from .metrics import RoundRecord, accuracy, class_accuracy, label_histogram_report
from .partition import (
    Partition,
    dirichlet_partition,
    iid_partition,
    inject_global_fraction,
    load_partition,
    mirror_test_split,
    save_partition,
    single_label_partition,
)
from .worldgen import World, WorldSpec, build_world, default_world, preset_names, random_world_spec

__version__ = "0.1.0"
