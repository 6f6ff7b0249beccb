// src/textnorm.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/textnorm.h"

#include <cctype>

#include "ctxasr/tensor.h"

namespace ctxasr {

namespace {

inline bool IsSpaceByte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool IsWordByte(unsigned char c) {
  // Letters, digits and non-ASCII bytes count as word material for the
  // purposes of the UC transform and apostrophe retention.
  return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

std::string StyleTag(Style style) {
  switch (style) {
    case Style::kUc:
      return "WITHOUT CASING OR PUNCTUATION";
    case Style::kMcp:
      return "Mixed-cased English with punctuation";
  }
  throw ContractError("StyleTag: bad style");
}

std::string StyleName(Style style) {
  switch (style) {
    case Style::kUc:
      return "uc";
    case Style::kMcp:
      return "mcp";
  }
  throw ContractError("StyleName: bad style");
}

Style StyleFromName(const std::string& name) {
  if (name == "uc") return Style::kUc;
  if (name == "mcp") return Style::kMcp;
  throw ContractError("StyleFromName: unknown style '" + name + "'");
}

std::string ApplyStyle(const std::string& text, Style style) {
  if (style == Style::kMcp) return text;
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  const size_t n = text.size();
  for (size_t i = 0; i < n; ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (IsSpaceByte(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    bool keep = false;
    char emit = static_cast<char>(c);
    if (IsWordByte(c)) {
      keep = true;
      if (c < 0x80) emit = static_cast<char>(std::toupper(c));
    } else if (c == '\'') {
      // Keep only apostrophes with word material directly on both sides.
      const bool prev_word =
          !pending_space && !out.empty() &&
          IsWordByte(static_cast<unsigned char>(out.back()));
      const bool next_word =
          i + 1 < n && IsWordByte(static_cast<unsigned char>(text[i + 1]));
      keep = prev_word && next_word;
    }
    if (!keep) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(emit);
  }
  return out;
}

std::string NormalizeUc(const std::string& text) {
  return ApplyStyle(text, Style::kUc);
}

Style SampleStyle(Rng& rng, double mcp_prob) {
  return rng.bernoulli(mcp_prob) ? Style::kMcp : Style::kUc;
}

std::string TruncateHistory(std::string_view text, size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  if (max_bytes == 0) return std::string();
  const size_t start = text.size() - max_bytes;
  std::string_view tail = text.substr(start);
  const bool at_boundary =
      IsSpaceByte(static_cast<unsigned char>(text[start - 1])) ||
      IsSpaceByte(static_cast<unsigned char>(tail.front()));
  if (!at_boundary) {
    // Drop the leading partial word (this also discards any dangling UTF-8
    // continuation bytes from a mid-codepoint cut).
    size_t sp = 0;
    while (sp < tail.size() &&
           !IsSpaceByte(static_cast<unsigned char>(tail[sp]))) {
      ++sp;
    }
    if (sp == tail.size()) return std::string();
    tail = tail.substr(sp);
  }
  size_t keep = 0;
  while (keep < tail.size() &&
         IsSpaceByte(static_cast<unsigned char>(tail[keep]))) {
    ++keep;
  }
  return std::string(tail.substr(keep));
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           IsSpaceByte(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    size_t j = i;
    while (j < text.size() &&
           !IsSpaceByte(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string ToLowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace ctxasr
