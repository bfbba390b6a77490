// Copyright 2026 The selfsup Authors.
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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by every stage. A "word" is a maximal run of
// non-whitespace bytes; whitespace is the ASCII set " \t\n\r\f\v".
namespace selfsup::text {

constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::vector<std::string_view> split_words(std::string_view s);
std::vector<std::string> split_words_copy(std::string_view s);
std::size_t count_words(std::string_view s) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string join(const std::vector<std::string_view>& parts,
                 std::string_view sep);

std::string_view trim(std::string_view s) noexcept;

/// Collapses whitespace runs into single spaces and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);

/// Number of Unicode scalar values in a UTF-8 string (continuation bytes are
/// not counted). Invalid sequences count one per non-continuation byte.
std::size_t utf8_length(std::string_view s) noexcept;

bool contains(std::string_view haystack, std::string_view needle) noexcept;

}  // namespace selfsup::text
