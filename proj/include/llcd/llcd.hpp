/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#ifndef LLCD_LLCD_HPP_
#define LLCD_LLCD_HPP_

#include "llcd/changegen.hpp"
#include "llcd/config.hpp"
#include "llcd/core.hpp"
#include "llcd/distributions.hpp"
#include "llcd/divergence.hpp"
#include "llcd/em.hpp"
#include "llcd/experiments.hpp"
#include "llcd/io.hpp"
#include "llcd/models.hpp"
#include "llcd/parallel.hpp"
#include "llcd/window_tests.hpp"

#endif  // LLCD_LLCD_HPP_
