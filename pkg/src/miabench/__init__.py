"""Desk-scale membership-inference benchmark for SGD, SAM, DP-SGD and DP-SAM."""

from .attacks import (AttackEvaluation, NnDecider, ShadowAttackModel,
                      ThresholdDecider, ThresholdModel, evaluate_attack,
                      fit_threshold, nn_decide, threshold_decide,
                      top_k_confidences, train_shadow_attack)
from .data import (FormatError, FourWaySplit, SyntheticSpec,
                   gen_gaussian_mixture, load_cifar_binary, load_csv, save_csv,
                   split_pool, stratified_four_way)
from .experiment import (ATTACK_NAMES, EpochRecord, FrontierPoint,
                         OutlierReport, aggregate, dominates, find_outliers,
                         run_experiment)
from .nn import (Dataset, Gradient, MlpModel, Rng, Sample, batch_confidences,
                 batch_gradient, forward, init_model, loss, losses,
                 make_dataset, make_rng, per_sample_gradients, test_accuracy)
from .optim import (Checkpoint, LrSchedule, TrainConfig, clip,
                    constant_schedule, global_norm, load_model, lr_at_epoch,
                    sam_perturbation, save_model, step, train)
from .privacy import (DEFAULT_ORDERS, AccountantConfig, PrivacyParams,
                      advantage, check_fpr_fnr_bounds, epsilon_from_rdp,
                      epsilon_schedule, error_bound, rdp_subsampled_gaussian)

__version__ = "0.1.0"
