from _hmica import (  # noqa: F401
    DatasetBundle,
    DemixNet,
    GaussianStateParams,
    ModelParams,
    PosteriorSet,
    TrainResult,
    TransitionMatrix,
    check_assumptions,
    decode,
    demix,
    forward_backward,
    generate_dataset,
    hungarian,
    mcc,
    state_accuracy,
    stationary_distribution,
    train,
    viterbi,
)
