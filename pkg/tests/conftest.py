# Copyright 2023 Cloudbase Solutions Srl
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

import numpy as np
import pytest

from secantcert.ffield import FieldModulus
from secantcert.geometry import TangentPoint


# Points of the published T(7, 8; 0, 0, 0) run with seed 1440664437.
PUBLISHED_SEED = 1440664437
PUBLISHED_POINTS = [
    ([6240, 5559, 4744, 2128, 3525, 2499, 7333, 2585],
     [5179, 5860, 2731, 4978, 4356, 4995, 358, 2752]),
    ([6524, 4761, 3599, 7815, 1716, 2187, 4195, 7889],
     [1512, 3708, 6893, 7109, 5519, 5965, 5496, 2212]),
    ([2484, 8072, 7956, 3951, 6365, 63, 6777, 37],
     [5225, 7196, 2009, 3291, 6451, 5475, 2616, 5079]),
    ([4096, 596, 3500, 6582, 5675, 2959, 6074, 3891],
     [4798, 7696, 188, 5184, 578, 1679, 2657, 335]),
    ([7882, 7500, 5717, 2715, 1488, 1144, 5362, 5122],
     [3740, 7615, 3260, 3859, 2746, 75, 1181, 1268]),
    ([5979, 741, 5874, 6408, 7902, 5006, 3801, 6057],
     [5718, 1256, 7323, 3359, 1176, 5753, 675, 3460]),
    ([4415, 2885, 403, 5801, 124, 1935, 8094, 6722],
     [5366, 1942, 5568, 1892, 6945, 5454, 7057, 5850]),
    ([4552, 7106, 6564, 5562, 6468, 3805, 3021, 5507],
     [7463, 2235, 5324, 6275, 2378, 2047, 1639, 7436]),
]


@pytest.fixture
def modulus() -> FieldModulus:
    return FieldModulus()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20231017)


@pytest.fixture
def published_points() -> list[TangentPoint]:
    return [TangentPoint.from_vectors(l, m) for l, m in PUBLISHED_POINTS]


@pytest.fixture
def published_seed() -> int:
    return PUBLISHED_SEED
