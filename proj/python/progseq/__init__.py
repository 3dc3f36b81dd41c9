# Copyright 2026 The progseq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Text-to-pose sequence generation with a progressive transformer."""

from ._progseq import (
    Checkpoint,
    ConfigError,
    Corpus,
    Error,
    NumericError,
    ParseError,
    ShapeError,
    bleu,
    dtw,
    generate_corpus,
    gradcheck,
    load_corpus,
    rouge_l,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "Corpus",
    "Error",
    "NumericError",
    "ParseError",
    "ShapeError",
    "bleu",
    "dtw",
    "generate_corpus",
    "gradcheck",
    "load_corpus",
    "rouge_l",
]
