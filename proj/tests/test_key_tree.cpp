#include <doctest.h>

#include <algorithm>

#include "gcs/errors.hpp"
#include "gcs/key_tree.hpp"

using namespace gcs;

namespace {

const std::vector<UserId> kEight{"u1", "u2", "u3", "u4", "u5", "u6", "u7", "u8"};

// The inner node whose user set is exactly `users`.
NodeId node_with_users(const KeyTree& t, const std::set<UserId>& users) {
    for (const auto& [id, node] : t.nodes()) {
        if (node.user) continue;
        if (t.userset(id) == users) return id;
    }
    FAIL("no node with the expected user set");
    return 0;
}

}  // namespace

TEST_CASE("eight members at degree 3 build the classic 3/3/2 tree") {
    DeterministicRng rng(0);
    const KeyTree t = KeyTree::build(kEight, 3, 16, rng);
    t.validate();

    CHECK(t.at(t.root()).children.size() == 3);
    CHECK(t.userset(t.root()) == std::set<UserId>(kEight.begin(), kEight.end()));
    node_with_users(t, {"u1", "u2", "u3"});
    node_with_users(t, {"u4", "u5", "u6"});
    node_with_users(t, {"u7", "u8"});

    // u5 holds its individual key, the middle key over {u4,u5,u6}, and the
    // group key, in leaf-to-root order.
    const auto ks = t.keyset("u5");
    REQUIRE(ks.size() == 3);
    CHECK(ks.front().node == t.leaf_of("u5"));
    CHECK(ks[1].node == node_with_users(t, {"u4", "u5", "u6"}));
    CHECK(ks.back().node == t.root());
    CHECK(t.height() == 2);
}

TEST_CASE("single-member group is root plus one leaf") {
    DeterministicRng rng(0);
    const KeyTree t = KeyTree::build({"solo"}, 3, 16, rng);
    t.validate();
    const auto ks = t.keyset("solo");
    REQUIRE(ks.size() == 2);
    CHECK(ks.back().node == t.root());
    CHECK(t.userset(t.root()) == std::set<UserId>{"solo"});
}

TEST_CASE("keyset and userset reject unknown names") {
    DeterministicRng rng(0);
    const KeyTree t = KeyTree::build(kEight, 3, 16, rng);
    CHECK_THROWS_AS(t.keyset("nobody"), UnknownUser);
    CHECK_THROWS_AS(t.userset(99999), UnknownNode);
    CHECK_THROWS_AS(t.path_to_root(99999), UnknownNode);
}

TEST_CASE("duplicate members are rejected") {
    DeterministicRng rng(0);
    CHECK_THROWS_AS(KeyTree::build({"a", "b", "a"}, 3, 16, rng), DuplicateUser);
}

TEST_CASE("joining point prefers the shallowest node with spare capacity") {
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build(kEight, 3, 16, rng);
    // Only the {u7,u8} node has fewer than 3 children.
    CHECK(t.find_joining_point() == node_with_users(t, {"u7", "u8"}));

    const NodeId leaf = t.reserve_node_id();
    const auto res = t.attach(t.find_joining_point(), "u9", {{leaf, 0, 0}, rng.gen_key(16)}, leaf);
    t.validate();
    CHECK_FALSE(res.split);
    CHECK(t.userset(res.parent) == std::set<UserId>{"u7", "u8", "u9"});
    CHECK(t.keyset("u9").size() == 3);
}

TEST_CASE("full binary tree splits the shallowest-leftmost leaf") {
    // Derived by enumerating the rule by hand: with every inner node full,
    // the first leaf in level order (u1's) is split, so the new parent sits
    // at the deepest level, leftmost.
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build({"u1", "u2", "u3", "u4"}, 2, 16, rng);
    const NodeId jp = t.find_joining_point();
    CHECK(jp == t.leaf_of("u1"));

    const NodeId old_parent = *t.at(jp).parent;
    const NodeId leaf = t.reserve_node_id();
    const auto res = t.attach(jp, "u5", {{leaf, 0, 0}, rng.gen_key(16)}, leaf);
    CHECK(res.split);
    CHECK(res.moved_leaf == t.leaf_of("u1"));
    CHECK(*t.at(res.parent).parent == old_parent);
    CHECK(t.userset(res.parent) == std::set<UserId>{"u1", "u5"});
    // The split node has no key until the rekeying installs one.
    t.install_fresh(res.parent, rng.gen_key(16));
    t.validate();
    CHECK(t.keyset("u1").size() == 4);
}

TEST_CASE("empty tree joins at the root") {
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build({"only"}, 3, 16, rng);
    t.detach("only");
    t.validate();
    CHECK(t.member_count() == 0);
    CHECK(t.find_joining_point() == t.root());
}

TEST_CASE("attach refuses a full joining point") {
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build(kEight, 3, 16, rng);
    const NodeId full = node_with_users(t, {"u1", "u2", "u3"});
    const NodeId leaf = t.reserve_node_id();
    CHECK_THROWS_AS(t.attach(full, "u9", {{leaf, 0, 0}, rng.gen_key(16)}, leaf), DegreeExceeded);
}

TEST_CASE("detach keeps two-child parents and splices one-child parents") {
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build(kEight, 3, 16, rng);
    const NodeId leaf9 = t.reserve_node_id();
    t.attach(node_with_users(t, {"u7", "u8"}), "u9", {{leaf9, 0, 0}, rng.gen_key(16)}, leaf9);

    // u8 leaves the {u7,u8,u9} node: two children remain, no splice.
    auto res = t.detach("u8");
    t.validate();
    CHECK_FALSE(res.spliced_key.has_value());
    CHECK(t.userset(res.leaving_point) == std::set<UserId>{"u7", "u9"});

    // u6 leaves {u4,u5,u6}: again two children remain.
    res = t.detach("u6");
    t.validate();
    CHECK_FALSE(res.spliced_key.has_value());
    CHECK(t.userset(res.leaving_point) == std::set<UserId>{"u4", "u5"});

    // Now u5 leaves {u4,u5}: the parent keeps only u4 and is spliced out.
    const NodeId doomed = res.leaving_point;
    res = t.detach("u5");
    t.validate();
    REQUIRE(res.spliced_key.has_value());
    CHECK(res.spliced_key->node == doomed);
    CHECK(t.nodes().count(doomed) == 0);
    CHECK(res.leaving_point == t.root());
    CHECK(*t.at(t.leaf_of("u4")).parent == t.root());
}

TEST_CASE("the root is never spliced away") {
    DeterministicRng rng(0);
    KeyTree t = KeyTree::build({"a", "b"}, 2, 16, rng);
    t.detach("a");
    t.validate();
    CHECK(t.member_count() == 1);
    CHECK(t.keyset("b").size() == 2);  // leaf + root survives as the group key node
}

TEST_CASE("duality: u in userset(k) iff k in keyset(u)") {
    DeterministicRng rng(17);
    std::vector<UserId> users;
    for (int i = 1; i <= 13; ++i) users.push_back("m" + std::to_string(i));
    const KeyTree t = KeyTree::build(users, 3, 16, rng);
    for (const auto& u : users) {
        std::set<NodeId> ks;
        for (const auto& id : t.keyset(u)) ks.insert(id.node);
        for (const auto& [node_id, node] : t.nodes()) {
            const bool in_userset = t.userset(node_id).count(u) != 0;
            CHECK(in_userset == (ks.count(node_id) != 0));
        }
    }
}

TEST_CASE("height stays logarithmic under random churn") {
    DeterministicRng rng(23);
    std::vector<UserId> users;
    for (int i = 1; i <= 27; ++i) users.push_back("m" + std::to_string(i));
    for (const int degree : {2, 3, 4}) {
        DeterministicRng local(degree * 100 + 1);
        KeyTree t = KeyTree::build(users, degree, 16, local);
        int next_name = 1000;
        for (int step = 0; step < 120; ++step) {
            const auto members = t.members();
            const bool do_join = members.size() < 2 || local.below(2) == 0;
            if (do_join) {
                const NodeId leaf = t.reserve_node_id();
                const UserId u = "m" + std::to_string(next_name++);
                const auto res = t.attach(t.find_joining_point(), u,
                                          {{leaf, 0, 0}, local.gen_key(16)}, leaf);
                if (res.split) t.install_fresh(res.parent, local.gen_key(16));
            } else {
                auto it = members.begin();
                std::advance(it, static_cast<long>(local.below(members.size())));
                t.detach(*it);
            }
            t.validate();
            const std::size_t n = t.member_count();
            std::size_t bound = 1;
            std::size_t pow = 1;
            while (pow < n) {
                pow *= static_cast<std::size_t>(degree);
                ++bound;
            }
            CHECK(t.height() <= bound + 1);

            for (const auto& u : t.members()) {
                const auto ks = t.keyset(u);
                CHECK(ks.size() <= t.height() + 1);
                CHECK(ks.back().node == t.root());
            }
        }
    }
}

TEST_CASE("canonical dump shape") {
    DeterministicRng rng(0);
    const KeyTree t = KeyTree::build({"u1", "u2"}, 2, 16, rng);
    const std::string dump = t.dump();
    // Preorder: root first, then the two leaves.
    const std::string root_line = "node=" + std::to_string(t.root()) + " epoch=0 parent=- users=u1,u2 keyfp=";
    CHECK(dump.rfind(root_line, 0) == 0);
    CHECK(std::count(dump.begin(), dump.end(), '\n') == 3);
    CHECK(dump.find("parent=" + std::to_string(t.root())) != std::string::npos);
}
