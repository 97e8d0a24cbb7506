/*
 * Copyright (c) 2026, kgrec authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "kgrec/config.hpp"
#include "kgrec/error.hpp"
#include "kgrec/eval.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/io.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"
#include "kgrec/pipeline.hpp"
#include "kgrec/recommend.hpp"
#include "kgrec/synthetic.hpp"
