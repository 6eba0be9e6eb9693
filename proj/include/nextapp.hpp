// Copyright 2026 The nextapp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "nextapp/artifacts.hpp"
#include "nextapp/backend.hpp"
#include "nextapp/clock.hpp"
#include "nextapp/commands.hpp"
#include "nextapp/config.hpp"
#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/eval.hpp"
#include "nextapp/external_client.hpp"
#include "nextapp/parallel.hpp"
#include "nextapp/pipeline.hpp"
#include "nextapp/protocol.hpp"
#include "nextapp/reference_backend.hpp"
#include "nextapp/synthetic.hpp"
#include "nextapp/templater.hpp"
#include "nextapp/text.hpp"
#include "nextapp/transport.hpp"
#include "nextapp/type_distribution.hpp"
#include "nextapp/typeprompt.hpp"
