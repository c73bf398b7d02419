// Copyright 2026 The lrqt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <exception>
#include <iostream>

#include "lrqt/app/cli.hpp"
#include "lrqt/blas_guard.hpp"

int main(int argc, char **argv) {
    try {
        lrqt::ensure_sound_blas(argv);
    } catch (const std::exception &e) {
        std::cerr << "lrqt: " << e.what() << "\n";
        return lrqt::app::kExitFailure;
    }
    return lrqt::app::cli_main(argc, argv);
}
