// include/ctxasr/textnorm.h
//
// Copyright (c)  2026  ctxasr authors
//
// Transcription styles and text normalization helpers.
//
// Two output styles are supported: UC (uppercase, no punctuation except
// intra-word apostrophes, collapsed whitespace) and MCP (mixed-case English
// with punctuation, i.e. the text as written).

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxasr/rng.h"

namespace ctxasr {

enum class Style { kUc, kMcp };

// Fixed tag phrases prepended to style prompts.
std::string StyleTag(Style style);

std::string StyleName(Style style);
Style StyleFromName(const std::string& name);

// UC: uppercase letters, strip punctuation except apostrophes with a letter
// on both sides, collapse whitespace runs to single spaces, trim the ends.
// MCP: identity.  Bytes above 0x7f pass through unchanged.
std::string ApplyStyle(const std::string& text, Style style);

// Normalization applied before WER scoring; identical to the UC transform.
std::string NormalizeUc(const std::string& text);

// Per-utterance style draw; returns MCP with probability mcp_prob.
Style SampleStyle(Rng& rng, double mcp_prob);

// Keeps at most max_bytes trailing bytes of text.  When a cut happens inside
// a word, the partial leading word (or UTF-8 fragment) is dropped so the
// result starts at a word boundary.
std::string TruncateHistory(std::string_view text, size_t max_bytes);

// Whitespace tokenization.
std::vector<std::string> SplitWords(std::string_view text);

std::string JoinWords(const std::vector<std::string>& words);

std::string ToLowerAscii(std::string_view s);

}  // namespace ctxasr
