##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################

"""
Tests the API submodule.
"""

from importlib import import_module
from pytest import fail


def test_import_from_api() -> None:
    """
    Test that we can import the specified symbol from subband_shake.api.
    """

    all_symbols = [
        "Adam",
        "backward",
        "build_deep",
        "build_shallow",
        "comparison_table",
        "count_parameters",
        "cross_entropy_loss",
        "early_stop_select",
        "ExperimentConfig",
        "extract_features",
        "featurize",
        "generate_synthetic_corpus",
        "get_workspace",
        "Granularity",
        "HyperParams",
        "load_features",
        "make_folds",
        "make_rng",
        "make_shake_coefficients",
        "model_summary",
        "paired_t_test_one_sided",
        "partition_actors",
        "partition_summary",
        "Phase",
        "read_manifest",
        "read_wav",
        "residual_shake_block",
        "run_mp",
        "sample_simplex",
        "shake_aggregate",
        "ShakeMode",
        "split_subbands",
        "stats",
        "step",
        "sweep",
        "sweep_patience",
        "synth_data",
        "SynthSpec",
        "Tensor",
        "TimerLogger",
        "train",
        "train_runs",
        "TrainReport",
        "unweighted_accuracy",
        "UtteranceRecord",
        "write_manifest",
        ]

    shake_api = import_module("subband_shake.api")
    assert sorted(shake_api.__all__, key=str.lower) == sorted(all_symbols, key=str.lower)
    for symbol_name in all_symbols:
        try:
            symbol = getattr(shake_api, symbol_name)
            assert symbol.__name__ == symbol_name
        except AttributeError:
            fail(f"Symbol `{symbol_name}` could not be imported "
                 f"from `subband_shake.api`.")
