#include <gtest/gtest.h>

#include <random>

#include "desk.hpp"
#include "skbf/errors.hpp"
#include "skbf/triplet.hpp"

namespace skbf {
namespace {

Schema desk_schema() { return testing::load_desk().schema(); }

std::string parse_error(std::string_view reply, const Schema& schema) {
  try {
    (void)parse_triplet_response(reply, schema);
  } catch (const ExtractionFormatError& e) {
    return e.what();
  }
  return "";
}

TEST(ExtractionPrompt, ListsVocabulariesGrammarAndQuery) {
  const auto prompt = build_extraction_prompt("Which papers did Alice Smith write?", desk_schema());
  for (const char* needle : {"paper", "author", "field", "writes", "in_field", "triplet-grammar v1",
                             "TARGET ?name", "Question: Which papers did Alice Smith write?"}) {
    EXPECT_NE(prompt.find(needle), std::string::npos) << needle;
  }
}

TEST(ExtractionPrompt, EmptyQueryRejected) {
  EXPECT_THROW((void)build_extraction_prompt("", desk_schema()), std::invalid_argument);
  EXPECT_THROW((void)build_extraction_prompt("   ", desk_schema()), std::invalid_argument);
  EXPECT_THROW((void)build_extraction_prompt("q", Schema{}), std::invalid_argument);
}

TEST(ExtractionPrompt, ListsEveryEdgeType) {
  Schema s;
  s.node_types = {"thing"};
  for (int i = 0; i < 18; ++i) s.edge_types.insert("edge_kind_" + std::to_string(100 + i));
  const auto prompt = build_extraction_prompt("q", s);
  for (const auto& e : s.edge_types) EXPECT_NE(prompt.find(e), std::string::npos) << e;
}

TEST(ParseReply, ReversedRolesKept) {
  const auto set =
      parse_triplet_response("(?p:paper, writes, \"Alice Smith\")\nTARGET ?p", desk_schema());
  ASSERT_EQ(set.triplets.size(), 1u);
  EXPECT_EQ(set.triplets[0].head, Term(Variable{"p", "paper"}));
  EXPECT_EQ(set.triplets[0].edge_type, "writes");
  EXPECT_EQ(set.triplets[0].tail, Term(Constant{"Alice Smith"}));
  EXPECT_EQ(set.target, (Variable{"p", "paper"}));
}

TEST(ParseReply, TwoTripletsTargetHead) {
  const auto set = parse_triplet_response(
      "(?a:author, writes, ?p:paper)\n(?p:paper, in_field, \"machine learning\")\nTARGET ?a",
      desk_schema());
  ASSERT_EQ(set.triplets.size(), 2u);
  EXPECT_EQ(set.target, (Variable{"a", "author"}));
}

TEST(ParseReply, NoTripletsIsAnError) {
  EXPECT_EQ(parse_error("no triples found", desk_schema()),
            "reply contains no parsable triplet line");
  EXPECT_EQ(parse_error("", desk_schema()), "reply contains no parsable triplet line");
}

TEST(ParseReply, MissingOrDanglingTarget) {
  const auto schema = desk_schema();
  EXPECT_EQ(parse_error("(\"Alice Smith\", writes, ?p:paper)", schema),
            "reply contains no TARGET line");
  EXPECT_NE(
      parse_error("(\"Alice Smith\", writes, ?p:paper)\nTARGET ?q", schema).find("does not occur"),
      std::string::npos);
}

TEST(ParseReply, TypeErrors) {
  const auto schema = desk_schema();
  EXPECT_NE(parse_error("(\"Alice\", writes, ?p:building)\nTARGET ?p", schema).find("undeclared"),
            std::string::npos);
  EXPECT_NE(
      parse_error("(?a:author, writes, ?p:paper)\n(?p:field, in_field, \"ML\")\nTARGET ?a", schema)
          .find("used with types"),
      std::string::npos);
}

TEST(ParseReply, NoiseAndDecorationsIgnored) {
  std::vector<ParseNote> notes;
  const auto set = parse_triplet_response(
      "Here are the triplets:\n1. (?a:author, \"writes\", \"Graph Reasoning Primer\").\n"
      "- (broken\nTARGET: ?a:author\nTARGET ?b",
      desk_schema(), &notes);
  ASSERT_EQ(set.triplets.size(), 1u);
  EXPECT_EQ(set.target.name, "a");
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].line, 3u);
  EXPECT_EQ(notes[1].message, "additional TARGET line ignored");
}

TEST(ParseReply, CloseEdgeTypeRepaired) {
  std::vector<ParseNote> notes;
  const auto set =
      parse_triplet_response("(\"Bob Jones\", write, ?p:paper)\nTARGET ?p", desk_schema(), &notes);
  EXPECT_EQ(set.triplets[0].edge_type, "writes");
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_NE(notes[0].message.find("repaired"), std::string::npos);
}

TEST(ParseReply, DistantEdgeTypeDropped) {
  std::vector<ParseNote> notes;
  const auto set = parse_triplet_response(
      "(\"Bob Jones\", cites, ?p:paper)\n(\"Bob Jones\", writes, ?p:paper)\nTARGET ?p",
      desk_schema(), &notes);
  ASSERT_EQ(set.triplets.size(), 1u);
  EXPECT_EQ(set.triplets[0].edge_type, "writes");
  EXPECT_NE(notes.at(0).message.find("dropped"), std::string::npos);
  EXPECT_THROW((void)parse_triplet_response("(\"Bob\", cites, ?p:paper)\nTARGET ?p", desk_schema()),
               ExtractionFormatError);
}

TEST(ParseReply, EscapedConstants) {
  const auto set = parse_triplet_response(R"((?p:paper, writes, "say \"hi\" \\ there")
TARGET ?p)",
                                          desk_schema());
  EXPECT_EQ(std::get<Constant>(set.triplets[0].tail).surface, "say \"hi\" \\ there");
}

TEST(Grammar, RoundTripsThroughFormatter) {
  const auto schema = desk_schema();
  TripletSet set;
  set.triplets = {Triplet{Constant{"A \"quoted\"\tname"}, "writes", Variable{"p", "paper"}},
                  Triplet{Variable{"p", "paper"}, "in_field", Constant{"ML, AI (etc)"}}};
  set.target = Variable{"p", "paper"};
  EXPECT_EQ(parse_triplet_response(to_grammar(set), schema), set);
}

TEST(Grammar, RandomSetsRoundTrip) {
  std::mt19937_64 rng(7);
  const auto schema = desk_schema();
  const std::vector<std::string> types(schema.node_types.begin(), schema.node_types.end());
  const std::vector<std::string> edges(schema.edge_types.begin(), schema.edge_types.end());
  const std::string alphabet = "abc XYZ,()\"\\?\t:.-";
  for (int round = 0; round < 500; ++round) {
    std::map<std::string, std::string> var_types;
    auto term = [&]() -> Term {
      if (rng() % 2 == 0) {
        const std::string name = std::string(1, static_cast<char>('a' + rng() % 4));
        auto [it, _] = var_types.emplace(name, types[rng() % types.size()]);
        return Variable{name, it->second};
      }
      std::string s;
      const auto len = 1 + rng() % 12;
      for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
      return Constant{s};
    };
    TripletSet set;
    const auto n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i)
      set.triplets.push_back({term(), edges[rng() % edges.size()], term()});
    const Variable* target = nullptr;
    for (const auto& t : set.triplets) {
      if (!target) target = std::get_if<Variable>(&t.head);
      if (!target) target = std::get_if<Variable>(&t.tail);
    }
    if (!target) continue;
    set.target = *target;
    EXPECT_EQ(parse_triplet_response(to_grammar(set), schema), set) << to_grammar(set);
  }
}

TEST(Grammar, ArbitraryBytesNeverCrash) {
  std::mt19937_64 rng(11);
  const auto schema = desk_schema();
  const std::string pieces[] = {"(",       ")",  ",",      "\"",    "?", ":",
                                "TARGET ", "\n", "writes", "paper", "\\"};
  for (int round = 0; round < 5000; ++round) {
    std::string s;
    const auto len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) {
      if (rng() % 2)
        s += pieces[rng() % std::size(pieces)];
      else
        s += static_cast<char>(rng() % 256);
    }
    try {
      const auto set = parse_triplet_response(s, schema);
      EXPECT_FALSE(set.triplets.empty());
    } catch (const ExtractionFormatError&) {
    }
  }
}

}  // namespace
}  // namespace skbf
