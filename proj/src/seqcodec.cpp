#include "sketchloop/seqcodec.hpp"

#include <sstream>

#include "json.hpp"

namespace sketchloop {

namespace {

using nlohmann::json;

Token word_token(const std::string& w) {
  Token t;
  t.type = Token::Type::Word;
  t.text = w;
  return t;
}

Token tag_token(const std::string& tag) {
  Token t;
  t.type = Token::Type::Tag;
  t.text = tag;
  return t;
}

void push_words(TokenStream& s, const std::string& text) {
  for (const auto& w : split_words(text)) s.tokens.push_back(word_token(w));
}

void push_image(TokenStream& s, const RasterImage& img) {
  s.tokens.push_back(tag_token(kTagVisionStart));
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      Token t;
      t.type = Token::Type::Image;
      t.shape = img.cells[r][c].shape;
      t.color = img.cells[r][c].color;
      s.tokens.push_back(t);
    }
  }
  s.tokens.push_back(tag_token(kTagVisionEnd));
}

bool is_tag(const Token& t, const std::string& name) {
  return t.type == Token::Type::Tag && t.text == name;
}

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

TokenStream encode_trajectory(const Trajectory& t) {
  try {
    validate_trajectory(t);
  } catch (const RunError& e) {
    throw CodecError(std::string("cannot encode: ") + e.what());
  }
  if (split_words(t.prompt).empty()) {
    throw CodecError("cannot encode: empty prompt");
  }

  TokenStream s;
  push_words(s, t.prompt);
  if (t.initial) push_image(s, *t.initial);
  for (const auto& seg : t.segments) {
    switch (seg.kind) {
      case SegmentKind::Plan:
        s.tokens.push_back(tag_token(kTagIns));
        push_words(s, seg.ins_text);
        s.tokens.push_back(tag_token(kTagInsEnd));
        s.tokens.push_back(tag_token(kTagDes));
        push_words(s, seg.des_text);
        s.tokens.push_back(tag_token(kTagDesEnd));
        break;
      case SegmentKind::Refine:
      case SegmentKind::Inspect:
        s.tokens.push_back(tag_token(kTagRefine));
        push_words(s, seg.text);
        s.tokens.push_back(tag_token(kTagRefineEnd));
        break;
      case SegmentKind::Vision:
        push_image(s, seg.image);
        break;
    }
  }
  Token eos;
  eos.type = Token::Type::Eos;
  eos.text = kTagEos;
  s.tokens.push_back(eos);
  return s;
}

namespace {

// Cursor over the token vector with block-level reads.
struct Reader {
  const std::vector<Token>& toks;
  size_t i = 0;

  bool done() const { return i >= toks.size(); }
  const Token& peek() const {
    if (done()) throw CodecError("truncated stream");
    return toks[i];
  }

  // Words up to (not including) the closing tag, which is consumed.
  std::string words_until(const std::string& close) {
    std::string out;
    while (true) {
      if (done()) throw CodecError("unbalanced tag: missing " + close);
      const Token& t = toks[i++];
      if (is_tag(t, close)) return out;
      if (t.type != Token::Type::Word) {
        throw CodecError("unexpected token inside text block before " + close);
      }
      if (!out.empty()) out += ' ';
      out += t.text;
    }
  }

  RasterImage image_block() {
    ++i;  // consume <|vision_start|>
    RasterImage img;
    for (int cell = 0; cell < kGridSize * kGridSize; ++cell) {
      if (done() || peek().type != Token::Type::Image) {
        throw CodecError("vision block payload is not 36 image tokens");
      }
      const Token& t = toks[i++];
      img.cells[cell / kGridSize][cell % kGridSize] = {t.shape, t.color};
    }
    if (done() || !is_tag(peek(), kTagVisionEnd)) {
      throw CodecError("unbalanced tag: missing " + kTagVisionEnd);
    }
    ++i;
    return img;
  }
};

}  // namespace

Trajectory decode_stream(const TokenStream& s) {
  Reader rd{s.tokens};
  Trajectory t;

  std::string prompt;
  while (!rd.done() && rd.peek().type == Token::Type::Word) {
    if (!prompt.empty()) prompt += ' ';
    prompt += rd.toks[rd.i++].text;
  }
  if (prompt.empty()) throw CodecError("stream does not start with a prompt");
  t.prompt = prompt;

  if (!rd.done() && is_tag(rd.peek(), kTagVisionStart)) {
    t.initial = rd.image_block();
  }

  bool saw_eos = false;
  while (!rd.done()) {
    const Token& head = rd.peek();
    if (head.type == Token::Type::Eos) {
      ++rd.i;
      saw_eos = true;
      if (!rd.done()) throw CodecError("tokens after end-of-sequence");
      break;
    }
    if (is_tag(head, kTagIns)) {
      ++rd.i;
      Segment seg;
      seg.kind = SegmentKind::Plan;
      seg.ins_text = rd.words_until(kTagInsEnd);
      if (rd.done() || !is_tag(rd.peek(), kTagDes)) {
        throw CodecError("plan block missing " + kTagDes);
      }
      ++rd.i;
      seg.des_text = rd.words_until(kTagDesEnd);
      t.segments.push_back(std::move(seg));
      continue;
    }
    if (is_tag(head, kTagRefine)) {
      ++rd.i;
      Segment seg;
      seg.text = rd.words_until(kTagRefineEnd);
      seg.kind = seg.text == kInspectOkWord ? SegmentKind::Inspect
                                            : SegmentKind::Refine;
      t.segments.push_back(std::move(seg));
      continue;
    }
    if (is_tag(head, kTagVisionStart)) {
      Segment seg;
      seg.kind = SegmentKind::Vision;
      seg.image = rd.image_block();
      t.segments.push_back(std::move(seg));
      continue;
    }
    if (head.type == Token::Type::Tag) {
      throw CodecError("unexpected tag " + head.text);
    }
    throw CodecError("word token outside a text block");
  }
  if (!saw_eos) throw CodecError("stream missing end-of-sequence token");

  try {
    validate_trajectory(t);
  } catch (const RunError& e) {
    throw CodecError(std::string("decoded stream is malformed: ") + e.what());
  }

  // Derivable meta. Refine rounds count image repairs only: a refine block
  // that follows a vision block. Plan repairs (refine directly after plan)
  // and clean inspections are excluded.
  t.meta.steps = 0;
  t.meta.refine_rounds = 0;
  const RasterImage* last_image = t.initial ? &*t.initial : nullptr;
  for (size_t i = 0; i < t.segments.size(); ++i) {
    const Segment& seg = t.segments[i];
    if (seg.kind == SegmentKind::Plan) ++t.meta.steps;
    if (seg.kind == SegmentKind::Vision) last_image = &seg.image;
    if (seg.kind == SegmentKind::Refine && i > 0 &&
        t.segments[i - 1].kind == SegmentKind::Vision) {
      ++t.meta.refine_rounds;
    }
  }
  t.meta.success = false;
  if (last_image != nullptr) {
    try {
      SceneGraph full = parse_scene(t.prompt, ParseMode::FullPrompt);
      t.meta.success = image_matches_scene(full, *last_image);
    } catch (const ParseError&) {
      t.meta.success = false;
    }
  }
  return t;
}

LossMask loss_mask(const TokenStream& s) {
  LossMask m;
  m.ce.resize(s.tokens.size(), false);
  bool in_text = false;
  bool seen_ins = false;
  for (size_t i = 0; i < s.tokens.size(); ++i) {
    const Token& t = s.tokens[i];
    switch (t.type) {
      case Token::Type::Word:
        m.ce[i] = in_text;
        break;
      case Token::Type::Tag:
        m.ce[i] = true;
        if (t.text == kTagIns || t.text == kTagDes || t.text == kTagRefine) {
          in_text = true;
          if (t.text == kTagIns) seen_ins = true;
        } else if (t.text == kTagInsEnd || t.text == kTagDesEnd ||
                   t.text == kTagRefineEnd) {
          in_text = false;
        } else if (t.text == kTagVisionStart) {
          // A vision block before any plan block is the initial input;
          // everything after the model is expected to produce.
          m.mse.push_back(seen_ins);
        }
        break;
      case Token::Type::Image:
      case Token::Type::Eos:
        m.ce[i] = false;
        break;
    }
  }
  return m;
}

std::string stream_to_json(const TokenStream& s) {
  json arr = json::array();
  for (const auto& t : s.tokens) {
    json e;
    switch (t.type) {
      case Token::Type::Word:
        e["t"] = "word";
        e["v"] = t.text;
        break;
      case Token::Type::Tag:
        e["t"] = "tag";
        e["v"] = t.text;
        break;
      case Token::Type::Image:
        e["t"] = "img";
        e["s"] = int(t.shape);
        e["c"] = int(t.color);
        break;
      case Token::Type::Eos:
        e["t"] = "eos";
        break;
    }
    arr.push_back(std::move(e));
  }
  return json{{"tokens", std::move(arr)}}.dump();
}

TokenStream stream_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CodecError(std::string("bad stream json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tokens") ||
      !doc["tokens"].is_array()) {
    throw CodecError("bad stream json: missing tokens array");
  }
  TokenStream s;
  for (const auto& e : doc["tokens"]) {
    if (!e.is_object() || !e.contains("t") || !e["t"].is_string()) {
      throw CodecError("bad stream json: malformed token entry");
    }
    const std::string kind = e["t"].get<std::string>();
    Token t;
    try {
      if (kind == "word" || kind == "tag") {
        t.type = kind == "word" ? Token::Type::Word : Token::Type::Tag;
        t.text = e.at("v").get<std::string>();
      } else if (kind == "img") {
        t.type = Token::Type::Image;
        int s_code = e.at("s").get<int>();
        int c_code = e.at("c").get<int>();
        if (s_code < 0 || s_code > int(kShapeCount) || c_code < 0 ||
            c_code > int(kColorCount)) {
          throw CodecError("bad stream json: image code out of range");
        }
        t.shape = uint8_t(s_code);
        t.color = uint8_t(c_code);
      } else if (kind == "eos") {
        t.type = Token::Type::Eos;
        t.text = kTagEos;
      } else {
        throw CodecError("bad stream json: unknown token type " + kind);
      }
    } catch (const json::exception& ex) {
      throw CodecError(std::string("bad stream json: ") + ex.what());
    }
    s.tokens.push_back(std::move(t));
  }
  return s;
}

std::string stream_display(const TokenStream& s) {
  std::string out;
  bool in_image = false;
  auto sep = [&] {
    if (!out.empty() && out.back() != '[') out += ' ';
  };
  for (const auto& t : s.tokens) {
    switch (t.type) {
      case Token::Type::Image:
        if (!in_image) {
          sep();
          out += '[';
          in_image = true;
        }
        sep();
        out += char('0' + t.shape);
        out += char('0' + t.color);
        break;
      case Token::Type::Word:
      case Token::Type::Tag:
      case Token::Type::Eos:
        if (in_image) {
          out += ']';
          in_image = false;
        }
        sep();
        out += t.text;
        break;
    }
  }
  return out;
}

bool same_content(const Trajectory& a, const Trajectory& b) {
  if (a.prompt != b.prompt || a.initial != b.initial) return false;
  if (a.segments.size() != b.segments.size()) return false;
  for (size_t i = 0; i < a.segments.size(); ++i) {
    const Segment& x = a.segments[i];
    const Segment& y = b.segments[i];
    if (x.kind != y.kind || x.ins_text != y.ins_text ||
        x.des_text != y.des_text || x.text != y.text || x.image != y.image) {
      return false;
    }
  }
  return a.meta.steps == b.meta.steps &&
         a.meta.refine_rounds == b.meta.refine_rounds &&
         a.meta.success == b.meta.success;
}

}  // namespace sketchloop
