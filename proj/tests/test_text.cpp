#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hoikit/annotations.hpp"
#include "hoikit/text_knowledge.hpp"

using namespace hoikit;

namespace {

Vocabulary small_vocab() {
  return Vocabulary::build({"human", "ball", "bicycle"}, {"hold", "ride"});
}

TripletAnnotation ann(int object_class, std::vector<int> verbs) {
  TripletAnnotation a;
  a.human_box = Box{0.1, 0.1, 0.4, 0.4};
  a.object_box = Box{0.5, 0.5, 0.9, 0.9};
  a.object_class = object_class;
  a.verbs = std::move(verbs);
  return a;
}

}  // namespace

TEST_CASE("normalization lowercases and collapses whitespace") {
  REQUIRE(normalize_text("  Human   RIDES\t a Bike ") == "human rides a bike");
  REQUIRE(normalize_text("") == "");
  REQUIRE(normalize_text("   ") == "");
}

TEST_CASE("vocabulary round-trips words and rejects unknowns") {
  const Vocabulary v = small_vocab();
  REQUIRE(v.token(v.lookup("ball")) == "ball");
  REQUIRE(v.token(v.lookup("[sep]")) == "[sep]");
  REQUIRE(v.lookup("human") == 0);
  REQUIRE_THROWS_AS(v.lookup("laptop"), VocabularyError);
  REQUIRE_THROWS_AS(v.token(-1), VocabularyError);
  REQUIRE(v.size() == 8);  // 3 objects + 2 verbs + 3 structural tokens
}

TEST_CASE("vocabulary table must start with the human category") {
  REQUIRE_THROWS_AS(Vocabulary::build({"ball"}, {"hold"}), ConfigError);
  REQUIRE_THROWS_AS(Vocabulary::build({"human", "red ball"}, {"hold"}), ConfigError);
}

TEST_CASE("serialization writes one clause per annotation verb") {
  const Vocabulary v = small_vocab();
  const std::vector<TripletAnnotation> anns{ann(2, {1}), ann(1, {0, 1})};
  const SerializedText ser = serialize_annotations(anns, v);

  REQUIRE(ser.subs.size() == 3);  // 1 + 2 verbs
  REQUIRE(ser.subs[0].text == "human ride bicycle");
  REQUIRE(ser.subs[1].text == "human hold ball");
  REQUIRE(ser.subs[2].text == "human ride ball");
  REQUIRE(ser.joined == "human ride bicycle [SEP] human hold ball [SEP] human ride ball");
  REQUIRE(ser.subs[0].annotation_index == 0);
  REQUIRE(ser.subs[1].annotation_index == 1);
  REQUIRE(ser.subs[2].annotation_index == 1);
  REQUIRE(ser.subs[2].verb == 1);

  int total_verbs = 0;
  for (const auto& a : anns) total_verbs += int(a.verbs.size());
  REQUIRE(int(ser.subs.size()) == total_verbs);
}

TEST_CASE("tokenize and detokenize round-trip") {
  const Vocabulary v = small_vocab();
  const auto ids = tokenize("Human  RIDE bicycle", v);
  REQUIRE(ids.size() == 3);
  REQUIRE(detokenize(ids, v) == "human ride bicycle");
  REQUIRE_THROWS_AS(tokenize("   ", v), LengthError);
  REQUIRE_THROWS_AS(tokenize("human eats ball", v), VocabularyError);
}

TEST_CASE("stub encoder output layout and determinism") {
  StubTextEncoder<double> enc(16, 8, 10, 3);
  const std::vector<int> ids{1, 4, 2};
  const Tensor<double> a = enc.encode(ids);
  const Tensor<double> b = enc.encode(ids);
  REQUIRE((a.shape == std::vector<int>{5, 8}));  // summary + 3 words + end
  REQUIRE(*a.data == *b.data);

  StubTextEncoder<double> other_seed(16, 8, 10, 4);
  REQUIRE(*other_seed.encode(ids).data != *a.data);
}

TEST_CASE("stub encoder summary row is the mean of the word rows") {
  StubTextEncoder<double> enc(16, 6, 12, 1);
  const std::vector<int> ids{3, 7, 7, 1};
  const Tensor<double> out = enc.encode(ids);
  for (int d = 0; d < 6; ++d) {
    double mean = 0.0;
    for (int i = 1; i <= 4; ++i) mean += out.at(i, d);
    mean /= 4.0;
    REQUIRE(out.at(0, d) == Catch::Approx(mean).margin(1e-12));
  }
}

TEST_CASE("stub encoder length and id guards") {
  StubTextEncoder<double> enc(8, 4, 5, 0);
  REQUIRE_THROWS_AS(enc.encode({}), LengthError);
  REQUIRE_THROWS_AS(enc.encode({0, 1, 2, 3}), LengthError);  // 4 + 2 > 5
  REQUIRE_NOTHROW(enc.encode({0, 1, 2}));
  REQUIRE_THROWS_AS(enc.encode({8}), VocabularyError);
  REQUIRE_THROWS_AS(StubTextEncoder<double>(8, 4, 2, 0), ConfigError);
}

TEST_CASE("encode_text stacks clause summaries and word rows") {
  const Vocabulary v = small_vocab();
  StubTextEncoder<double> enc(v.size(), 6, 12, 5);
  const std::vector<TripletAnnotation> anns{ann(1, {0}), ann(2, {0, 1})};
  const SerializedText ser = serialize_annotations(anns, v);
  const TextEncoding<double> text = encode_text(ser, v, enc);

  REQUIRE(text.num_subs() == 3);
  REQUIRE((text.cls.shape == std::vector<int>{3, 6}));
  REQUIRE(text.num_words() == 9);  // three words per clause
  REQUIRE((text.words.shape == std::vector<int>{9, 6}));
  REQUIRE((text.word_sub_index == std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2}));
  REQUIRE((text.sub_annotation_index == std::vector<int>{0, 1, 1}));
  REQUIRE((text.sub_verb == std::vector<int>{0, 0, 1}));

  // clause rows equal a direct encoding of the same clause
  const Tensor<double> direct = enc.encode(tokenize("human hold ball", v));
  for (int d = 0; d < 6; ++d) {
    REQUIRE(text.cls.at(0, d) == direct.at(0, d));
    REQUIRE(text.words.at(0, d) == direct.at(1, d));
    REQUIRE(text.words.at(2, d) == direct.at(3, d));
  }

  // a scene without annotations produces an empty encoding
  const TextEncoding<double> empty = encode_text(serialize_annotations({}, v), v, enc);
  REQUIRE(empty.num_subs() == 0);
  REQUIRE_FALSE(empty.cls.defined());
}

TEST_CASE("stub encoder tables never change") {
  StubTextEncoder<double> enc(12, 5, 10, 9);
  const auto before = enc.table_snapshot();
  enc.encode({1, 2, 3});
  enc.encode({0});
  enc.encode({11, 10});
  REQUIRE(enc.table_snapshot() == before);
}

TEST_CASE("encoded text tensors are constants outside the graph") {
  const Vocabulary v = small_vocab();
  StubTextEncoder<double> enc(v.size(), 4, 10, 0);
  const TextEncoding<double> text =
      encode_text(serialize_annotations({ann(1, {0})}, v), v, enc);
  REQUIRE_FALSE(text.cls.requires_grad);
  REQUIRE_FALSE(text.words.requires_grad);
  REQUIRE(text.cls.node == nullptr);
  REQUIRE(text.words.node == nullptr);
}

TEST_CASE("annotation normalization sorts and dedupes verbs") {
  TripletAnnotation a = ann(1, {1, 0, 1});
  a.normalize();
  REQUIRE((a.verbs == std::vector<int>{0, 1}));
  REQUIRE_NOTHROW(a.validate(2, 3));

  TripletAnnotation bad = ann(5, {0});
  REQUIRE_THROWS_AS(bad.validate(2, 3), DomainError);
  TripletAnnotation bad_verb = ann(1, {7});
  REQUIRE_THROWS_AS(bad_verb.validate(2, 3), DomainError);
}
