// Copyright 2026 The progseq Authors
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

#include "progseq/data.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace progseq {

// POSEQ1 text format:
//   line 1: "POSEQ1 <J> <U>"
//   then U lines of 3J+1 space-separated decimals (joints, then counter).
// Numbers are written in shortest round-trip form, LF line endings.

void write_poseq(std::ostream& out, const PoseSequence& seq);
void write_poseq(const std::filesystem::path& path, const PoseSequence& seq);
/// Throws ParseError carrying the offending line number.
PoseSequence read_poseq(std::istream& in);
PoseSequence read_poseq(const std::filesystem::path& path);

/// Shortest decimal that parses back to exactly `v`.
std::string format_number(double v);

/// Writes manifest.json, templates/*.poseq and {train,dev,test}/*.poseq.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace progseq
