#pragma once

#include <string>
#include <vector>

#include "sketchloop/orchestrator.hpp"

namespace sketchloop {

class CodecError : public std::runtime_error {
 public:
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Tag vocabulary. Text segments use word-level open/close pairs; images sit
// between the vision boundary tokens as 36 cell payload tokens.
inline const std::string kTagIns = "<ins>";
inline const std::string kTagInsEnd = "</ins>";
inline const std::string kTagDes = "<des>";
inline const std::string kTagDesEnd = "</des>";
inline const std::string kTagRefine = "<refine>";
inline const std::string kTagRefineEnd = "</refine>";
inline const std::string kTagVisionStart = "<|vision_start|>";
inline const std::string kTagVisionEnd = "<|vision_end|>";
inline const std::string kTagEos = "<|endoftext|>";

// Clean inspection verdicts share the refine block; this sentinel word is
// their entire payload and is never a valid instruction.
inline const std::string kInspectOkWord = "ok";

struct Token {
  enum class Type : uint8_t { Word, Tag, Image, Eos };
  Type type = Type::Word;
  std::string text;   // Word and Tag
  uint8_t shape = 0;  // Image cell payload
  uint8_t color = 0;
  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenStream {
  std::vector<Token> tokens;
  friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

// Serializes a trajectory: prompt words, the initial image when editing,
// then per segment `<ins>…</ins><des>…</des>`, `<refine>…</refine>` or a
// vision block, closed by end-of-sequence. Throws CodecError when the
// trajectory breaks the segment grammar.
TokenStream encode_trajectory(const Trajectory& t);

// Exact inverse of encode_trajectory on its image. Rebuilds the derivable
// meta fields (steps, refine rounds, success); fault labels and refine
// findings are not carried by tokens and come back empty. Throws CodecError
// on unbalanced tags, bad vision payloads, a missing terminator, or a
// stream continuing past its final vision block.
Trajectory decode_stream(const TokenStream& s);

struct LossMask {
  std::vector<bool> ce;   // per token
  std::vector<bool> mse;  // per vision block, in stream order
};

// ce is true on words inside text segments, on the six text tags and on the
// vision boundary tokens; false on prompt words, image payloads and the
// end-of-sequence token. mse is true for every vision block except an
// initial input image (one appearing before the first `<ins>`).
LossMask loss_mask(const TokenStream& s);

std::string stream_to_json(const TokenStream& s);
TokenStream stream_from_json(const std::string& text);

// One-line display form: tags and words verbatim, each vision block
// collapsed to its 36 cell codes in brackets.
std::string stream_display(const TokenStream& s);

// Equality over everything tokens can carry: prompt, initial image,
// segment kinds/texts/images, and the derivable meta fields.
bool same_content(const Trajectory& a, const Trajectory& b);

std::vector<std::string> split_words(const std::string& text);

}  // namespace sketchloop
