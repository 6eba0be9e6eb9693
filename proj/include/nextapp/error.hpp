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

#include <stdexcept>
#include <string>

namespace nextapp {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or precondition violation by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data could not be turned into a corpus (e.g. reject ratio exceeded).
class DataError : public Error {
 public:
  using Error::Error;
};

// A required upstream artifact is missing or was produced by another config.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

// Backend could not be reached or did not answer in time. Retriable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Backend answered with something that is not a valid frame.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string frame)
      : Error(what + " [frame: " + frame + "]"), frame_(std::move(frame)) {}

  const std::string& frame() const noexcept { return frame_; }

 private:
  std::string frame_;
};

// Backend answered a request with an explicit error frame.
class RemoteError : public Error {
 public:
  using Error::Error;
};

}  // namespace nextapp
