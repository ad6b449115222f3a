#include <doctest.h>

#include <fstream>
#include <random>

#include "kbqa/kb_store.hpp"
#include "support/fixtures.hpp"

using namespace kbqa;
using kbqa::test::data_path;
using kbqa::test::fixture_kb;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = "/tmp/kbqa_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_SUITE_BEGIN("kb_store");

TEST_CASE("fixture loads with the expected counts") {
    const KbStore& kb = fixture_kb();
    CHECK(kb.triple_count() == 47);
    CHECK(kb.entity_count() == 18);
    CHECK(kb.relation_count() == 15);
    CHECK(kb.label("m.06w2sn5") == "Justin Bieber");
    CHECK(kb.label("m.zzz").empty());
}

TEST_CASE("subjects_of agrees with a brute-force scan") {
    const KbStore& kb = fixture_kb();
    const auto& males = kb.subjects_of("people.person.gender", TripleObject{"m.05zppz"});

    std::set<std::string> scanned;
    for (const Triple& t : kb.triples())
        if (t.relation == "people.person.gender" && object_is_entity(t.object) &&
            std::get<std::string>(t.object) == "m.05zppz")
            scanned.insert(t.subject);
    CHECK(males == scanned);
    CHECK(males == std::set<std::string>{"m.06w2sn5", "m.0gxnnwc", "m.0jrb1m"});

    CHECK(kb.subjects_of("no.such.relation", TripleObject{"m.05zppz"}).empty());
}

TEST_CASE("literal objects are looked up by typed value") {
    const KbStore& kb = fixture_kb();
    const auto& y2012 = kb.subjects_of("music.album.release_year", TripleObject{*Literal::infer("2012")});
    CHECK(y2012 == std::set<std::string>{"m.0alb12"});
    // same lexical looked up as the wrong kind finds nothing
    CHECK(kb.subjects_of("music.album.release_year",
                         TripleObject{Literal{"2012", LiteralKind::Integer}})
              .empty());
}

TEST_CASE("objects_of mirrors subjects_of over all fixture triples") {
    const KbStore& kb = fixture_kb();
    auto sibling_mediators = kb.objects_of("m.06w2sn5", "people.person.sibling_s");
    CHECK(sibling_mediators.size() == 2);
    CHECK(kb.objects_of("m.zzz", "people.person.sibling_s").empty());

    for (const Triple& t : kb.triples()) {
        bool found = false;
        for (const TripleObject& o : kb.objects_of(t.subject, t.relation))
            if (o == t.object) found = true;
        CHECK(found);
        CHECK(kb.subjects_of(t.relation, t.object).contains(t.subject));
    }
}

TEST_CASE("index lookups equal brute-force scans on random probes") {
    const KbStore& kb = fixture_kb();
    std::vector<std::string> entities;
    for (const auto& [id, label] : kb.labels()) entities.push_back(id);
    std::sort(entities.begin(), entities.end());

    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto& relation = kb.relations()[rng() % kb.relation_count()];
        const auto& subject = entities[rng() % entities.size()];
        const auto& object = entities[rng() % entities.size()];

        std::set<std::string> scan_subjects;
        std::vector<TripleObject> scan_objects;
        for (const Triple& t : kb.triples()) {
            if (t.relation == relation && object_is_entity(t.object) &&
                std::get<std::string>(t.object) == object)
                scan_subjects.insert(t.subject);
            if (t.relation == relation && t.subject == subject)
                scan_objects.push_back(t.object);
        }
        CHECK(kb.subjects_of(relation, TripleObject{object}) == scan_subjects);
        auto indexed = kb.objects_of(subject, relation);
        CHECK(std::vector<TripleObject>(indexed.begin(), indexed.end()) == scan_objects);
    }
}

TEST_CASE("neighborhood is monotone in hops and distributes over union at one hop") {
    const KbStore& kb = fixture_kb();
    const std::set<std::string> jb = {"m.06w2sn5"};

    auto one = kb.neighborhood(jb, 1);
    CHECK(one == std::set<std::string>{
                     "people.person.gender", "people.person.sibling_s", "people.person.parents",
                     "people.person.date_of_birth", "people.person.place_of_birth",
                     "music.artist.album"});

    auto two = kb.neighborhood(jb, 2);
    for (const auto& r : one) CHECK(two.contains(r));
    CHECK(two.size() > one.size());

    CHECK(kb.neighborhood({}, 1).empty());

    const std::set<std::string> a = {"m.06w2sn5"}, b = {"m.0avnrv"};
    auto both = kb.neighborhood({"m.06w2sn5", "m.0avnrv"}, 1);
    auto expected = kb.neighborhood(a, 1);
    for (const auto& r : kb.neighborhood(b, 1)) expected.insert(r);
    CHECK(both == expected);
}

TEST_CASE("entity candidates: alias lookup is normalized and weight-ordered") {
    const KbStore& kb = fixture_kb();

    auto justin = kb.entity_candidates("justin bieber");
    REQUIRE(justin.size() == 1);
    CHECK(justin[0] == std::pair<std::string, double>{"m.06w2sn5", 1.0});

    CHECK(kb.entity_candidates("  JUSTIN   Bieber ") == justin);
    CHECK(kb.entity_candidates("zzzz-unknown").empty());

    auto bieber = kb.entity_candidates("bieber");
    REQUIRE(bieber.size() == 2);
    CHECK(bieber[0] == std::pair<std::string, double>{"m.06w2sn5", 0.9});
    CHECK(bieber[1] == std::pair<std::string, double>{"m.0gxnnwc", 0.3});

    // two mediators share the label; ties break by ID
    auto mediators = kb.entity_candidates("sibling relationship");
    REQUIRE(mediators.size() == 2);
    CHECK(mediators[0].first == "m.0srg0x1");
    CHECK(mediators[1].first == "m.0srg0x2");
}

TEST_CASE("empty triples file loads an empty store") {
    auto triples = write_temp("empty_triples.tsv", "");
    auto labels = write_temp("empty_labels.tsv", "m.x\tSomething\n");
    auto aliases = write_temp("empty_aliases.tsv", "");
    KbStore kb = KbStore::load(triples, labels, aliases);
    CHECK(kb.triple_count() == 0);
    CHECK(kb.relation_count() == 0);
    CHECK(kb.subjects_of("a.b", TripleObject{"m.x"}).empty());
    CHECK(kb.neighborhood({"m.x"}, 1).empty());
}

TEST_CASE("load errors carry file and line diagnostics") {
    auto labels = write_temp("ok_labels.tsv", "m.x\tSomething\n");
    auto aliases = write_temp("ok_aliases.tsv", "");

    auto unlabeled = write_temp("bad_triples1.tsv", "m.y\ta.b\tm.x\n");
    CHECK_THROWS_WITH_AS(KbStore::load(unlabeled, labels, aliases),
                         doctest::Contains("no label entry"), KbLoadError);

    auto malformed = write_temp("bad_triples2.tsv", "m.x\ta.b\tm.x\nm.x only-two-fields\n");
    try {
        KbStore::load(malformed, labels, aliases);
        FAIL("expected KbLoadError");
    } catch (const KbLoadError& e) {
        CHECK(e.line() == 2);
    }

    auto bad_weight = write_temp("bad_aliases.tsv", "x\tm.x\t1.5\n");
    auto ok_triples = write_temp("ok_triples.tsv", "");
    CHECK_THROWS_AS(KbStore::load(ok_triples, labels, bad_weight), KbLoadError);

    CHECK_THROWS_AS(KbStore::load("/nonexistent/file", labels, aliases), KbLoadError);
}

TEST_CASE("duplicate triples deduplicate at load") {
    auto labels = write_temp("dup_labels.tsv", "m.x\tX\nm.y\tY\n");
    auto triples = write_temp("dup_triples.tsv", "m.x\ta.b\tm.y\nm.x\ta.b\tm.y\nm.x\ta.b\t7\nm.x\ta.b\t7\n");
    auto aliases = write_temp("dup_aliases.tsv", "");
    KbStore kb = KbStore::load(triples, labels, aliases);
    CHECK(kb.triple_count() == 2);
}

TEST_SUITE_END();
