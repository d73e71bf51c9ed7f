// SPDX-License-Identifier: Apache-2.0
//
// sparse-csi: sparsity-inspired CSI acquisition toolkit for massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef SPARSE_CSI_SPARSE_RECOVERY_HPP
#define SPARSE_CSI_SPARSE_RECOVERY_HPP

// Joint OMP, weighted l1, nuclear-norm and GM-AMP-EM channel recovery.
#include "gm_amp.hpp"
#include "joint_omp.hpp"
#include "nuclear_norm.hpp"
#include "recovery_config.hpp"
#include "weighted_l1.hpp"

#endif
