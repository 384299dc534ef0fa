#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoikit/annotations.hpp"
#include "hoikit/core/rng.hpp"
#include "hoikit/core/tensor.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

inline std::string normalize_text(const std::string& s) {
  std::string out;
  bool in_space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// Closed vocabulary over the dataset's category and verb names plus the
// structural tokens. Lookup happens after normalization, so any case works.
class Vocabulary {
 public:
  static Vocabulary build(std::vector<std::string> object_names,
                          std::vector<std::string> verb_names) {
    Vocabulary v;
    if (object_names.empty() || normalize_text(object_names[0]) != "human")
      throw ConfigError("object name table must start with \"human\"");
    v.object_names_ = std::move(object_names);
    v.verb_names_ = std::move(verb_names);
    auto add = [&v](const std::string& raw) {
      const std::string w = normalize_text(raw);
      if (w.empty()) throw ConfigError("empty vocabulary entry");
      if (w.find(' ') != std::string::npos)
        throw ConfigError("vocabulary entries must be single words: " + raw);
      if (!v.ids_.count(w)) {
        v.ids_[w] = int(v.tokens_.size());
        v.tokens_.push_back(w);
      }
    };
    for (const auto& n : v.object_names_) add(n);
    for (const auto& n : v.verb_names_) add(n);
    add("[cls]");
    add("[end]");
    add("[sep]");
    v.cls_id_ = v.ids_.at("[cls]");
    v.end_id_ = v.ids_.at("[end]");
    v.sep_id_ = v.ids_.at("[sep]");
    return v;
  }

  int lookup(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) throw VocabularyError("unknown word: \"" + word + "\"");
    return it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= int(tokens_.size())) throw VocabularyError("token id out of range");
    return tokens_[std::size_t(id)];
  }

  const std::string& object_name(int cls) const {
    if (cls < 0 || cls >= int(object_names_.size()))
      throw VocabularyError("object class out of range");
    return object_names_[std::size_t(cls)];
  }

  const std::string& verb_name(int verb) const {
    if (verb < 0 || verb >= int(verb_names_.size()))
      throw VocabularyError("verb id out of range");
    return verb_names_[std::size_t(verb)];
  }

  int size() const { return int(tokens_.size()); }
  int num_object_classes() const { return int(object_names_.size()); }
  int num_verbs() const { return int(verb_names_.size()); }
  int cls_id() const { return cls_id_; }
  int end_id() const { return end_id_; }
  int sep_id() const { return sep_id_; }
  const std::vector<std::string>& object_names() const { return object_names_; }
  const std::vector<std::string>& verb_names() const { return verb_names_; }

 private:
  std::vector<std::string> object_names_, verb_names_, tokens_;
  std::unordered_map<std::string, int> ids_;
  int cls_id_ = 0, end_id_ = 0, sep_id_ = 0;
};

// One "human <verb> <object>" clause, tagged with the annotation it came from.
struct SubSentence {
  std::string text;
  int annotation_index = 0;
  int verb = 0;
};

struct SerializedText {
  std::string joined;  // clauses joined by " [SEP] "
  std::vector<SubSentence> subs;
};

// Turns an image's annotations into text. Each (annotation, verb) becomes its
// own clause, in annotation order with verbs ascending; an annotation with
// multiple verbs therefore contributes multiple clauses.
inline SerializedText serialize_annotations(const std::vector<TripletAnnotation>& annotations,
                                            const Vocabulary& vocab) {
  SerializedText out;
  for (int a = 0; a < int(annotations.size()); ++a) {
    const auto& ann = annotations[std::size_t(a)];
    for (int verb : ann.verbs) {
      SubSentence sub;
      sub.text = "human " + normalize_text(vocab.verb_name(verb)) + " " +
                 normalize_text(vocab.object_name(ann.object_class));
      sub.annotation_index = a;
      sub.verb = verb;
      if (!out.joined.empty()) out.joined += " [SEP] ";
      out.joined += sub.text;
      out.subs.push_back(std::move(sub));
    }
  }
  return out;
}

inline std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  const std::string norm = normalize_text(text);
  if (norm.empty()) throw LengthError("cannot tokenize empty text");
  std::vector<int> ids;
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    ids.push_back(vocab.lookup(norm.substr(start, end - start)));
    start = end + 1;
  }
  return ids;
}

inline std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

// Text encoder plug-in contract. encode() receives word ids (no structural
// tokens) and returns [(len + 2) x dim]: row 0 is the sentence summary, the
// middle rows are contextualized words, the final row closes the sequence.
template <class T>
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Tensor<T> encode(const std::vector<int>& word_ids) = 0;
  virtual int dim() const = 0;
  virtual int max_length() const = 0;
};

// Deterministic frozen stand-in for a pretrained text encoder. Seeded lookup
// embeddings plus sinusoidal positions, one self-attention pass over the word
// rows (with residual), and a summary row equal to the mean of the
// contextualized words. All arithmetic runs in double; outputs are constants,
// so no gradient can reach the tables.
template <class T>
class StubTextEncoder : public TextEncoder<T> {
 public:
  StubTextEncoder(int vocab_size, int dim, int max_length, std::uint64_t seed)
      : vocab_size_(vocab_size), dim_(dim), max_length_(max_length) {
    if (vocab_size < 1 || dim < 1 || max_length < 3)
      throw ConfigError("stub text encoder needs vocab >= 1, dim >= 1, max length >= 3");
    Rng er(seed_stream(seed, fnv1a("stub-text.embed")));
    embed_.resize(std::size_t(vocab_size) * dim);
    for (auto& v : embed_) v = er.gaussian(0.0, 0.5);
    const double ws = 1.0 / std::sqrt(double(dim));
    Rng qr(seed_stream(seed, fnv1a("stub-text.wq")));
    Rng kr(seed_stream(seed, fnv1a("stub-text.wk")));
    Rng vr(seed_stream(seed, fnv1a("stub-text.wv")));
    wq_.resize(std::size_t(dim) * dim);
    wk_.resize(std::size_t(dim) * dim);
    wv_.resize(std::size_t(dim) * dim);
    for (auto& v : wq_) v = qr.gaussian(0.0, ws);
    for (auto& v : wk_) v = kr.gaussian(0.0, ws);
    for (auto& v : wv_) v = vr.gaussian(0.0, ws);
  }

  Tensor<T> encode(const std::vector<int>& word_ids) override {
    const int n = int(word_ids.size());
    if (n == 0) throw LengthError("text encoder needs at least one word");
    if (n + 2 > max_length_)
      throw LengthError("sequence of " + std::to_string(n + 2) + " tokens exceeds max length " +
                        std::to_string(max_length_));
    for (int id : word_ids)
      if (id < 0 || id >= vocab_size_) throw VocabularyError("word id out of range");

    // base rows: [summary, words..., end]; summary/end use reserved rows of
    // the embedding table (last two ids would collide with real words, so
    // they get synthetic embeddings derived from fixed streams)
    const int total = n + 2;
    std::vector<double> x(std::size_t(total) * dim_);
    fill_special(x.data(), 0, 0xC15ull);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim_; ++d)
        x[std::size_t(i + 1) * dim_ + d] = embed_[std::size_t(word_ids[i]) * dim_ + d];
    fill_special(x.data() + std::size_t(n + 1) * dim_, 0, 0xE4Dull);
    for (int i = 0; i < total; ++i)
      for (int d = 0; d < dim_; ++d) x[std::size_t(i) * dim_ + d] += sin_pos(i, d);

    // one attention pass over word rows only
    std::vector<double> q(std::size_t(n) * dim_), k(std::size_t(n) * dim_),
        v(std::size_t(n) * dim_);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim_; ++d) {
        double aq = 0, ak = 0, av = 0;
        for (int e = 0; e < dim_; ++e) {
          const double xe = x[std::size_t(i + 1) * dim_ + e];
          aq += xe * wq_[std::size_t(e) * dim_ + d];
          ak += xe * wk_[std::size_t(e) * dim_ + d];
          av += xe * wv_[std::size_t(e) * dim_ + d];
        }
        q[std::size_t(i) * dim_ + d] = aq;
        k[std::size_t(i) * dim_ + d] = ak;
        v[std::size_t(i) * dim_ + d] = av;
      }
    const double inv_sqrt = 1.0 / std::sqrt(double(dim_));
    std::vector<double> ctx(std::size_t(n) * dim_);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int d = 0; d < dim_; ++d)
          s += q[std::size_t(i) * dim_ + d] * k[std::size_t(j) * dim_ + d];
        w[std::size_t(j)] = s * inv_sqrt;
        mx = std::max(mx, w[std::size_t(j)]);
      }
      double sum = 0;
      for (int j = 0; j < n; ++j) {
        w[std::size_t(j)] = std::exp(w[std::size_t(j)] - mx);
        sum += w[std::size_t(j)];
      }
      for (int d = 0; d < dim_; ++d) {
        double acc = 0;
        for (int j = 0; j < n; ++j) acc += w[std::size_t(j)] * v[std::size_t(j) * dim_ + d];
        ctx[std::size_t(i) * dim_ + d] = x[std::size_t(i + 1) * dim_ + d] + acc / sum;
      }
    }

    Tensor<T> out = Tensor<T>::zeros({total, dim_});
    for (int d = 0; d < dim_; ++d) {
      double mean = 0;
      for (int i = 0; i < n; ++i) mean += ctx[std::size_t(i) * dim_ + d];
      out.at(0, d) = T(mean / double(n));  // summary row: mean of attended words
      for (int i = 0; i < n; ++i) out.at(i + 1, d) = T(ctx[std::size_t(i) * dim_ + d]);
      out.at(total - 1, d) = T(x[std::size_t(total - 1) * dim_ + d]);
    }
    return out;
  }

  int dim() const override { return dim_; }
  int max_length() const override { return max_length_; }

  // Byte image of the frozen tables, used by tests to prove training never
  // touches them.
  std::vector<double> table_snapshot() const {
    std::vector<double> snap = embed_;
    snap.insert(snap.end(), wq_.begin(), wq_.end());
    snap.insert(snap.end(), wk_.begin(), wk_.end());
    snap.insert(snap.end(), wv_.begin(), wv_.end());
    return snap;
  }

 private:
  void fill_special(double* row, int, std::uint64_t tag) const {
    Rng r(seed_stream(0xFEEDull, tag));
    for (int d = 0; d < dim_; ++d) row[d] = r.gaussian(0.0, 0.5);
  }

  double sin_pos(int pos, int d) const {
    const double expo = double(2 * (d / 2)) / double(dim_);
    const double angle = double(pos) / std::pow(10000.0, expo);
    return (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }

  int vocab_size_, dim_, max_length_;
  std::vector<double> embed_, wq_, wk_, wv_;
};

// Per-image text encoding: one summary row per clause plus the stacked
// contextualized word rows across clauses. Everything is constant.
template <class T>
struct TextEncoding {
  Tensor<T> cls;    // [S x dim]
  Tensor<T> words;  // [Nw x dim]
  std::vector<int> word_sub_index;        // word row -> clause index
  std::vector<int> sub_annotation_index;  // clause index -> annotation index
  std::vector<int> sub_verb;              // clause index -> verb id

  int num_subs() const { return int(sub_annotation_index.size()); }
  int num_words() const { return int(word_sub_index.size()); }
};

template <class T>
inline TextEncoding<T> encode_text(const SerializedText& ser, const Vocabulary& vocab,
                                   TextEncoder<T>& encoder) {
  TextEncoding<T> out;
  const int S = int(ser.subs.size());
  if (S == 0) return out;  // image without interactions; losses are skipped upstream
  const int dim = encoder.dim();
  out.cls = Tensor<T>::zeros({S, dim});
  std::vector<std::vector<T>> word_rows;
  for (int s = 0; s < S; ++s) {
    const auto& sub = ser.subs[std::size_t(s)];
    const std::vector<int> ids = tokenize(sub.text, vocab);
    Tensor<T> enc = encoder.encode(ids);
    for (int d = 0; d < dim; ++d) out.cls.at(s, d) = enc.at(0, d);
    for (int i = 0; i < int(ids.size()); ++i) {
      std::vector<T> row(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) row[std::size_t(d)] = enc.at(i + 1, d);
      word_rows.push_back(std::move(row));
      out.word_sub_index.push_back(s);
    }
    out.sub_annotation_index.push_back(sub.annotation_index);
    out.sub_verb.push_back(sub.verb);
  }
  out.words = Tensor<T>::zeros({int(word_rows.size()), dim});
  for (int r = 0; r < int(word_rows.size()); ++r)
    for (int d = 0; d < dim; ++d) out.words.at(r, d) = word_rows[std::size_t(r)][std::size_t(d)];
  return out;
}

}  // namespace hoikit
