#include <doctest.h>

#include <random>

#include "kbqa/executor.hpp"
#include "support/fixtures.hpp"
#include "support/form_generator.hpp"

using namespace kbqa;
using kbqa::test::fixture_kb;

namespace {

LogicalForm grounded(const std::string& text) { return parse(text, ParseMode::Grounded); }

const char* kGoldSibling =
    "(AND (JOIN people.person.gender m.05zppz) (JOIN (R people.sibling_relationship.sibling) "
    "(JOIN (R people.person.sibling_s) m.06w2sn5)))";

}  // namespace

TEST_SUITE_BEGIN("executor");

TEST_CASE("sibling question evaluates to the value a brute-force scan derives") {
    const KbStore& kb = fixture_kb();

    // independent derivation by scanning the raw triples
    std::set<std::string> males, mediators, siblings;
    for (const Triple& t : kb.triples()) {
        if (t.relation == "people.person.gender" && object_to_string(t.object) == "m.05zppz")
            males.insert(t.subject);
        if (t.relation == "people.person.sibling_s" && t.subject == "m.06w2sn5")
            mediators.insert(object_to_string(t.object));
    }
    for (const Triple& t : kb.triples())
        if (t.relation == "people.sibling_relationship.sibling" && mediators.contains(t.subject))
            siblings.insert(object_to_string(t.object));
    std::set<std::string> expected;
    for (const auto& id : siblings)
        if (males.contains(id)) expected.insert(id);
    REQUIRE(expected == std::set<std::string>{"m.0gxnnwc"});

    AnswerSet result = execute(grounded(kGoldSibling), kb);
    CHECK(result.kind == AnswerSet::Kind::Entities);
    CHECK(result.entities == expected);
}

TEST_CASE("count of an empty join is zero") {
    AnswerSet result = execute(grounded("(COUNT (JOIN no.such.relation m.06w2sn5))"), fixture_kb());
    CHECK(result.kind == AnswerSet::Kind::Count);
    CHECK(result.count == 0);
}

TEST_CASE("entity leaves evaluate to singletons; AND is idempotent and commutative") {
    const KbStore& kb = fixture_kb();
    AnswerSet leaf = execute(grounded("m.06w2sn5"), kb);
    CHECK(leaf.entities == std::set<std::string>{"m.06w2sn5"});

    const char* e = "(JOIN people.person.gender m.05zppz)";
    AnswerSet plain = execute(grounded(e), kb);
    AnswerSet doubled = execute(grounded("(AND " + std::string(e) + " " + e + ")"), kb);
    CHECK(plain == doubled);

    const char* f = "(JOIN people.person.place_of_birth m.01snm)";
    AnswerSet ab = execute(grounded("(AND " + std::string(e) + " " + f + ")"), kb);
    AnswerSet ba = execute(grounded("(AND " + std::string(f) + " " + e + ")"), kb);
    CHECK(ab == ba);
}

TEST_CASE("literal-object joins look up typed values") {
    const KbStore& kb = fixture_kb();
    AnswerSet born = execute(grounded("(JOIN people.person.date_of_birth 1994-03-01)"), kb);
    CHECK(born.entities == std::set<std::string>{"m.06w2sn5"});

    AnswerSet year = execute(grounded("(JOIN music.album.release_year 2012)"), kb);
    CHECK(year.entities == std::set<std::string>{"m.0alb12"});
}

TEST_CASE("comparisons filter literal sets") {
    const KbStore& kb = fixture_kb();
    // fixture floats {3.1, 3.2, 4.0}
    AnswerSet gt = execute(grounded("(GT (JOIN (R geography.river.discharge) m.0avnrv) 3.2)"), kb);
    REQUIRE(gt.kind == AnswerSet::Kind::Literals);
    CHECK(gt.to_strings() == std::vector<std::string>{"4.0"});

    AnswerSet le = execute(grounded("(LE (JOIN (R geography.river.discharge) m.0avnrv) 3.2)"), kb);
    CHECK(le.to_strings() == std::vector<std::string>{"3.1", "3.2"});

    AnswerSet ge = execute(grounded("(GE (JOIN (R geography.river.discharge) m.0avnrv) 3.2)"), kb);
    CHECK(ge.to_strings() == std::vector<std::string>{"3.2", "4.0"});

    AnswerSet lt = execute(grounded("(LT (JOIN (R geography.river.discharge) m.0avnrv) 3.2)"), kb);
    CHECK(lt.to_strings() == std::vector<std::string>{"3.1"});
}

TEST_CASE("GT and LE partition a literal set; cross-kind temporal comparison coerces") {
    const KbStore& kb = fixture_kb();
    AnswerSet all = execute(grounded("(JOIN (R music.album.release_year) m.0alb12)"), kb);
    REQUIRE(all.to_strings() == std::vector<std::string>{"2012"});

    // year literal vs date bound
    AnswerSet after =
        execute(grounded("(GT (JOIN (R music.album.release_year) m.0alb12) 2011-12-31)"), kb);
    CHECK(after.to_strings() == std::vector<std::string>{"2012"});

    std::mt19937_64 rng(31);
    kbqa::test::GroundedQueryGenerator generator(kb);
    int partitions_checked = 0;
    for (int i = 0; i < 60; ++i) {
        LogicalForm base = generator.rooted(rng, NodeKind::Gt);
        const LogicalForm& sub = base.children[0];
        const Literal& bound = *base.children[1].literal;
        AnswerSet whole, gt_part, le_part;
        try {
            whole = execute(sub, kb);
            gt_part = execute(LogicalForm::comparison(NodeKind::Gt, sub, bound), kb);
            le_part = execute(LogicalForm::comparison(NodeKind::Le, sub, bound), kb);
        } catch (const EvalError&) {
            continue;
        }
        std::set<Literal> unioned = gt_part.literals;
        unioned.insert(le_part.literals.begin(), le_part.literals.end());
        CHECK(unioned == whole.literals);
        for (const Literal& lit : gt_part.literals) CHECK_FALSE(le_part.literals.contains(lit));
        ++partitions_checked;
    }
    CHECK(partitions_checked > 20);
}

TEST_CASE("ARGMAX keeps ties and stays inside its operand") {
    const KbStore& kb = fixture_kb();
    // two albums tie at 13 tracks
    AnswerSet most = execute(
        grounded("(ARGMAX (JOIN (R music.artist.album) m.06w2sn5) music.album.track_count)"), kb);
    CHECK(most.entities == std::set<std::string>{"m.0alb12", "m.0alb15"});

    AnswerSet first = execute(
        grounded("(ARGMIN (JOIN (R music.artist.album) m.06w2sn5) music.album.release_date)"), kb);
    CHECK(first.entities == std::set<std::string>{"m.0alb10"});

    // no projections: empty result, not an error
    AnswerSet none = execute(
        grounded("(ARGMAX (JOIN people.person.gender m.05zppz) music.album.track_count)"), kb);
    CHECK(none.empty());

    // singleton operand with a projection comes back unchanged
    AnswerSet solo =
        execute(grounded("(ARGMAX (JOIN music.album.release_year 2012) music.album.track_count)"),
                kb);
    CHECK(solo.entities == std::set<std::string>{"m.0alb12"});
}

TEST_CASE("error paths: kind mismatches and incomparable literals") {
    const KbStore& kb = fixture_kb();
    // entities AND literals
    CHECK_THROWS_AS(execute(grounded("(AND (JOIN people.person.gender m.05zppz) "
                                     "(JOIN (R geography.river.discharge) m.0avnrv))"),
                            kb),
                    EvalError);
    // comparison over entities
    CHECK_THROWS_AS(execute(grounded("(GT (JOIN people.person.gender m.05zppz) 3.2)"), kb),
                    EvalError);
    // temporal vs numeric
    CHECK_THROWS_AS(
        execute(grounded("(GT (JOIN (R geography.river.discharge) m.0avnrv) 1999-12-31)"), kb),
        EvalError);
    // COUNT of a COUNT
    CHECK_THROWS_AS(execute(grounded("(COUNT (COUNT (JOIN a.b m.x)))"), kb), EvalError);
    // ungrounded slot
    CHECK_THROWS_AS(execute(parse("(JOIN [ a ] [ B ])", ParseMode::Textual), kb), EvalError);
}

TEST_CASE("is_executable: non-empty success only") {
    const KbStore& kb = fixture_kb();
    CHECK(is_executable(grounded(kGoldSibling), kb));
    CHECK_FALSE(is_executable(grounded("(JOIN no.such.relation m.06w2sn5)"), kb));
    CHECK_FALSE(is_executable(grounded("(AND (JOIN people.person.gender m.05zppz) "
                                       "(JOIN (R geography.river.discharge) m.0avnrv))"),
                              kb));
    // counting an empty set is not a usable answer
    CHECK_FALSE(is_executable(grounded("(COUNT (JOIN no.such.relation m.06w2sn5))"), kb));
    CHECK(is_executable(grounded("(COUNT (JOIN (R music.artist.album) m.06w2sn5))"), kb));
}

TEST_CASE("expansion cap aborts runaway evaluation") {
    const KbStore& kb = fixture_kb();
    ExecOptions tight;
    tight.expansion_cap = 1;
    CHECK_THROWS_AS(execute(grounded("(JOIN people.person.gender m.05zppz)"), kb, tight),
                    EvalError);
}

TEST_SUITE_END();
