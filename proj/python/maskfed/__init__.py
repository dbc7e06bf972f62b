# Copyright 2026 The maskfed Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Federated ViT training with random gradient masks."""

from maskfed._core import (
    ConfigError,
    ContractError,
    FormatError,
    IoError,
    ModelConfig,
    NumericError,
    analyze,
    attack,
    attack_once,
    forward,
    generate_mask,
    grad_check,
    gradcheck,
    init_params,
    locked_update_count_pmf,
    loss_and_grad,
    patchify,
    simulate_update_counts,
    synth_dataset,
    total_variation,
    train,
    unpatchify,
    update_count_pmf,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "FormatError",
    "IoError",
    "ModelConfig",
    "NumericError",
    "analyze",
    "attack",
    "attack_once",
    "forward",
    "generate_mask",
    "grad_check",
    "gradcheck",
    "init_params",
    "locked_update_count_pmf",
    "loss_and_grad",
    "patchify",
    "simulate_update_counts",
    "synth_dataset",
    "total_variation",
    "train",
    "unpatchify",
    "update_count_pmf",
]
