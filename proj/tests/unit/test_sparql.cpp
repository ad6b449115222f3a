#include <doctest.h>

#include <random>

#include "kbqa/executor.hpp"
#include "kbqa/sparql.hpp"
#include "support/fixtures.hpp"
#include "support/form_generator.hpp"

using namespace kbqa;
using namespace kbqa::sparql;
using kbqa::test::fixture_kb;

namespace {

LogicalForm grounded(const std::string& text) { return parse(text, ParseMode::Grounded); }

// Error-aware comparison: queries either both fail or both produce the same set.
bool engines_agree(const LogicalForm& lf, const KbStore& kb) {
    std::optional<AnswerSet> direct;
    try {
        direct = execute(lf, kb);
    } catch (const EvalError&) {
    }
    std::optional<AnswerSet> via_sparql;
    try {
        via_sparql = execute_sparql(convert(lf), kb);
    } catch (const SparqlError&) {
    }
    if (direct.has_value() != via_sparql.has_value()) return false;
    return !direct || *direct == *via_sparql;
}

}  // namespace

TEST_SUITE_BEGIN("sparql");

TEST_CASE("single join emits the exact query template") {
    SparqlQuery q = convert(grounded("(JOIN people.person.gender m.05zppz)"));
    CHECK(q.text ==
          "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
          "SELECT DISTINCT ?x0 WHERE {\n"
          "?x0 ns:people.person.gender ns:m.05zppz .\n"
          "}");
}

TEST_CASE("count wraps the head, not the body") {
    SparqlQuery q = convert(grounded("(COUNT (JOIN people.person.gender m.05zppz))"));
    CHECK(q.text ==
          "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
          "SELECT (COUNT(DISTINCT ?x0) AS ?cnt) WHERE {\n"
          "?x0 ns:people.person.gender ns:m.05zppz .\n"
          "}");
    CHECK(q.count);
}

TEST_CASE("reverse joins, literals, and filters emit deterministically") {
    SparqlQuery q =
        convert(grounded("(GT (JOIN (R geography.river.discharge) m.0avnrv) 3.2)"));
    CHECK(q.text ==
          "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
          "SELECT DISTINCT ?x0 WHERE {\n"
          "ns:m.0avnrv ns:geography.river.discharge ?x0 .\n"
          "FILTER(?x0 > \"3.2\"^^ns:float)\n"
          "}");

    SparqlQuery q2 = convert(grounded("(JOIN people.person.date_of_birth 1994-03-01)"));
    CHECK(q2.text ==
          "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
          "SELECT DISTINCT ?x0 WHERE {\n"
          "?x0 ns:people.person.date_of_birth \"1994-03-01\"^^ns:date .\n"
          "}");

    // identical input, identical bytes
    CHECK(convert(grounded("(JOIN people.person.date_of_birth 1994-03-01)")).text == q2.text);
}

TEST_CASE("convert rejects ungrounded forms and non-root COUNT") {
    CHECK_THROWS_AS(convert(parse("(JOIN [ a ] [ B ])", ParseMode::Textual)), SparqlError);
    CHECK_THROWS_AS(convert(grounded("(JOIN a.b (COUNT (JOIN c.d m.x)))")), SparqlError);
    CHECK_THROWS_AS(convert(grounded("m.06w2sn5")), SparqlError);
}

TEST_CASE("parse_subset accepts every emitted query and reproduces its text") {
    std::mt19937_64 rng(4242);
    kbqa::test::GroundedQueryGenerator generator(fixture_kb());
    for (int i = 0; i < 150; ++i) {
        SparqlQuery emitted = convert(generator.next(rng));
        SparqlQuery reparsed = parse_subset(emitted.text);
        CHECK(reparsed.text == emitted.text);
        CHECK(to_text(reparsed) == emitted.text);
    }
}

TEST_CASE("parse_subset names out-of-subset constructs") {
    CHECK_THROWS_WITH_AS(parse_subset("PREFIX ns: <http://rdf.freebase.com/ns/>\n"
                                      "SELECT DISTINCT ?x0 WHERE {\n"
                                      "OPTIONAL { ?x0 ns:a.b ns:m.x . }\n"
                                      "}"),
                         doctest::Contains("OPTIONAL"), SparqlError);
    CHECK_THROWS_AS(parse_subset(""), SparqlError);
    CHECK_THROWS_AS(parse_subset("SELECT * WHERE { }"), SparqlError);
    CHECK_THROWS_WITH_AS(parse_subset("PREFIX ns: <http://rdf.freebase.com/ns/>\n"
                                      "SELECT DISTINCT ?x0 WHERE {\n"
                                      "?x0 ns:a.b ?x1 .\n"
                                      "ORDER BY ?x1\n"
                                      "}"),
                         doctest::Contains("ORDER"), SparqlError);
}

TEST_CASE("execute_sparql basics") {
    const KbStore& kb = fixture_kb();
    AnswerSet empty = execute_sparql(convert(grounded("(JOIN no.such.relation m.06w2sn5)")), kb);
    CHECK(empty.empty());

    AnswerSet zero =
        execute_sparql(convert(grounded("(COUNT (JOIN no.such.relation m.06w2sn5))")), kb);
    CHECK(zero.kind == AnswerSet::Kind::Count);
    CHECK(zero.count == 0);

    AnswerSet males = execute_sparql(convert(grounded("(JOIN people.person.gender m.05zppz)")), kb);
    CHECK(males.entities == std::set<std::string>{"m.06w2sn5", "m.0gxnnwc", "m.0jrb1m"});
}

TEST_CASE("the two executions agree on the fixture gold forms") {
    const KbStore& kb = fixture_kb();
    for (const DatasetRecord& record : kbqa::test::fixture_dataset()) {
        LogicalForm lf = grounded(record.logical_form);
        AnswerSet direct = execute(lf, kb);
        AnswerSet via_sparql = execute_sparql(convert(lf), kb);
        CHECK(direct == via_sparql);
        CHECK(direct.to_strings() == record.answers);
    }
}

TEST_CASE("the two executions agree on random grounded forms") {
    const KbStore& kb = fixture_kb();
    std::mt19937_64 rng(777);
    kbqa::test::GroundedQueryGenerator generator(kb);
    for (int i = 0; i < 120; ++i) CHECK(engines_agree(generator.next(rng), kb));
}

TEST_CASE("invert undoes convert") {
    const KbStore& kb = fixture_kb();

    LogicalForm single = grounded("(JOIN people.person.gender m.05zppz)");
    CHECK(invert(convert(single)) == single);

    for (const DatasetRecord& record : kbqa::test::fixture_dataset()) {
        LogicalForm lf = grounded(record.logical_form);
        CHECK(invert(convert(lf)) == lf);
    }

    std::mt19937_64 rng(2024);
    kbqa::test::GroundedQueryGenerator generator(kb);
    for (int i = 0; i < 120; ++i) {
        LogicalForm lf = generator.next(rng);
        CHECK(invert(convert(lf)) == lf);
    }
}

TEST_CASE("invert preserves AND association") {
    LogicalForm left = grounded(
        "(AND (AND (JOIN people.person.gender m.05zppz) (JOIN a.b m.x)) (JOIN c.d m.y))");
    LogicalForm right = grounded(
        "(AND (JOIN people.person.gender m.05zppz) (AND (JOIN a.b m.x) (JOIN c.d m.y)))");
    CHECK(invert(convert(left)) == left);
    CHECK(invert(convert(right)) == right);
    CHECK(convert(left).text != convert(right).text);
}

TEST_CASE("invert rejects disconnected and out-of-discipline queries") {
    CHECK_THROWS_WITH_AS(invert(parse_subset("PREFIX ns: <http://rdf.freebase.com/ns/>\n"
                                             "SELECT DISTINCT ?x0 WHERE {\n"
                                             "?x0 ns:a.b ns:m.x .\n"
                                             "?x5 ns:c.d ns:m.y .\n"
                                             "}")),
                         doctest::Contains("disconnected"), SparqlError);
    // three flat conjuncts cannot come out of binary ANDs
    CHECK_THROWS_AS(invert(parse_subset("PREFIX ns: <http://rdf.freebase.com/ns/>\n"
                                        "SELECT DISTINCT ?x0 WHERE {\n"
                                        "?x0 ns:a.b ns:m.x .\n"
                                        "?x0 ns:c.d ns:m.y .\n"
                                        "?x0 ns:e.f ns:m.z .\n"
                                        "}")),
                    SparqlError);
}

TEST_SUITE_END();
