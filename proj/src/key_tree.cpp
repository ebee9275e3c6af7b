#include "gcs/key_tree.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "gcs/errors.hpp"

namespace gcs {

const TreeNode& KeyTree::at(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownNode("node " + std::to_string(id));
    return it->second;
}

NodeId KeyTree::leaf_of(const UserId& u) const {
    auto it = leaves_.find(u);
    if (it == leaves_.end()) throw UnknownUser(u);
    return it->second;
}

std::set<UserId> KeyTree::members() const {
    std::set<UserId> out;
    for (const auto& [u, n] : leaves_) out.insert(u);
    return out;
}

NodeId KeyTree::new_node(std::optional<NodeId> parent) {
    const NodeId id = next_id_++;
    TreeNode node;
    node.parent = parent;
    node.key_id = {id, 0, 0};
    nodes_.emplace(id, std::move(node));
    return id;
}

KeyTree KeyTree::build(const std::vector<UserId>& members, int degree, std::size_t key_len,
                       DeterministicRng& rng) {
    if (degree < 2) throw InvariantViolation("tree degree must be at least 2");
    KeyTree t;
    t.degree_ = degree;

    std::vector<NodeId> level;
    for (const auto& u : members) {
        if (t.leaves_.count(u)) throw DuplicateUser(u);
        const NodeId id = t.new_node(std::nullopt);
        t.nodes_.at(id).user = u;
        t.nodes_.at(id).key = rng.gen_key(key_len);
        t.leaves_[u] = id;
        level.push_back(id);
    }

    if (level.empty()) {
        t.root_ = t.new_node(std::nullopt);
        t.nodes_.at(t.root_).key = rng.gen_key(key_len);
        return t;
    }

    // Group each level into ceil(len/d) chunks of near-equal size; a
    // singleton chunk passes its node up unchanged so no 1-child parents
    // are created. A lone member still gets a dedicated root above it.
    while (level.size() > 1 || t.nodes_.at(level.front()).user.has_value()) {
        const std::size_t len = level.size();
        const std::size_t groups = std::max<std::size_t>(1, (len + degree - 1) / degree);
        const std::size_t base = len / groups;
        const std::size_t extra = len % groups;
        std::vector<NodeId> next;
        std::size_t pos = 0;
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t size = base + (g < extra ? 1 : 0);
            if (size == 1 && len > 1) {
                next.push_back(level[pos++]);
                continue;
            }
            const NodeId parent = t.new_node(std::nullopt);
            t.nodes_.at(parent).key = rng.gen_key(key_len);
            for (std::size_t i = 0; i < size; ++i) {
                const NodeId child = level[pos++];
                t.nodes_.at(child).parent = parent;
                t.nodes_.at(parent).children.push_back(child);
            }
            next.push_back(parent);
        }
        level = std::move(next);
    }
    t.root_ = level.front();
    return t;
}

std::size_t KeyTree::height() const {
    std::size_t h = 0;
    std::deque<std::pair<NodeId, std::size_t>> queue{{root_, 0}};
    while (!queue.empty()) {
        auto [id, depth] = queue.front();
        queue.pop_front();
        h = std::max(h, depth);
        for (NodeId c : at(id).children) queue.emplace_back(c, depth + 1);
    }
    return h;
}

std::vector<VersionedKeyId> KeyTree::keyset(const UserId& u) const {
    std::vector<VersionedKeyId> out;
    for (NodeId id : path_to_root(leaf_of(u))) out.push_back(at(id).key_id);
    return out;
}

std::set<UserId> KeyTree::userset(NodeId k) const {
    std::set<UserId> out;
    std::deque<NodeId> queue{k};
    at(k);
    while (!queue.empty()) {
        const NodeId id = queue.front();
        queue.pop_front();
        const TreeNode& node = at(id);
        if (node.user) out.insert(*node.user);
        for (NodeId c : node.children) queue.push_back(c);
    }
    return out;
}

std::vector<NodeId> KeyTree::path_to_root(NodeId node) const {
    std::vector<NodeId> out;
    std::optional<NodeId> cur = node;
    at(node);
    while (cur) {
        out.push_back(*cur);
        cur = at(*cur).parent;
    }
    return out;
}

NodeId KeyTree::find_joining_point() const {
    std::optional<NodeId> first_leaf;
    std::deque<NodeId> queue{root_};
    while (!queue.empty()) {
        const NodeId id = queue.front();
        queue.pop_front();
        const TreeNode& node = at(id);
        if (node.user) {
            if (!first_leaf) first_leaf = id;
            continue;
        }
        if (node.children.size() < static_cast<std::size_t>(degree_)) return id;
        for (NodeId c : node.children) queue.push_back(c);
    }
    // Every inner node is full; split the shallowest-leftmost leaf.
    if (!first_leaf) throw InvariantViolation("no joining point in a keyed tree");
    return *first_leaf;
}

AttachResult KeyTree::attach(NodeId joining_point, const UserId& u, HeldKey individual,
                             NodeId reserved_leaf) {
    if (leaves_.count(u)) throw DuplicateUser(u);
    const TreeNode& jp = at(joining_point);
    if (individual.id.node != reserved_leaf)
        throw InvariantViolation("individual key id does not match its reserved node");

    AttachResult res;
    NodeId parent_id;
    if (jp.user.has_value()) {
        // Full tree: put a new inner node where this leaf was; the leaf and
        // the newcomer become its children. Its key is installed by the
        // rekeying step that follows.
        const NodeId grand = *jp.parent;
        const NodeId split = next_id_++;
        TreeNode split_node;
        split_node.parent = grand;
        split_node.key_id = {split, 0, 0};
        split_node.children.push_back(joining_point);
        nodes_.emplace(split, std::move(split_node));
        auto& siblings = nodes_.at(grand).children;
        *std::find(siblings.begin(), siblings.end(), joining_point) = split;
        nodes_.at(joining_point).parent = split;
        parent_id = split;
        res.split = true;
        res.moved_leaf = joining_point;
    } else {
        if (jp.children.size() >= static_cast<std::size_t>(degree_))
            throw DegreeExceeded("joining point is full");
        parent_id = joining_point;
    }

    TreeNode leaf;
    leaf.parent = parent_id;
    leaf.user = u;
    leaf.key_id = individual.id;
    leaf.key = std::move(individual.key);
    nodes_.emplace(reserved_leaf, std::move(leaf));
    nodes_.at(parent_id).children.push_back(reserved_leaf);
    leaves_[u] = reserved_leaf;
    res.leaf = reserved_leaf;
    res.parent = parent_id;
    return res;
}

DetachResult KeyTree::detach(const UserId& u) {
    const NodeId leaf = leaf_of(u);
    const NodeId parent = *at(leaf).parent;

    DetachResult res;
    res.removed_leaf_key = at(leaf).key_id;

    auto& children = nodes_.at(parent).children;
    children.erase(std::find(children.begin(), children.end(), leaf));
    nodes_.at(leaf).key.erase();
    nodes_.erase(leaf);
    leaves_.erase(u);

    if (parent != root_ && children.size() == 1) {
        // A 1-child inner node is spliced out; the child inherits its slot.
        // The spliced key was due to be replaced anyway, so it is discarded.
        const NodeId child = children.front();
        const NodeId grand = *nodes_.at(parent).parent;
        auto& siblings = nodes_.at(grand).children;
        *std::find(siblings.begin(), siblings.end(), parent) = child;
        nodes_.at(child).parent = grand;
        res.spliced_key = nodes_.at(parent).key_id;
        nodes_.at(parent).key.erase();
        nodes_.erase(parent);
        res.leaving_point = grand;
    } else if (parent != root_ && children.empty()) {
        throw InvariantViolation("non-root inner node left childless");
    } else {
        res.leaving_point = parent;
    }
    return res;
}

VersionedKeyId KeyTree::install_fresh(NodeId node, SecretKey key) {
    TreeNode& n = nodes_.at(node);
    n.key.erase();
    n.key = std::move(key);
    n.key_id = {node, n.key_id.gen + 1, 0};
    return n.key_id;
}

VersionedKeyId KeyTree::evolve(NodeId node, PrfMeter* meter) {
    TreeNode& n = nodes_.at(node);
    SecretKey next = prf_eval(n.key, PrfLabel::Next, meter);
    n.key.erase();
    n.key = std::move(next);
    n.key_id.epoch += 1;
    return n.key_id;
}

std::string KeyTree::dump() const {
    std::ostringstream out;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const TreeNode& node = at(id);
        out << "node=" << id << " epoch=" << node.key_id.epoch << " parent=";
        if (node.parent) {
            out << *node.parent;
        } else {
            out << "-";
        }
        out << " users=";
        bool first = true;
        for (const auto& u : userset(id)) {
            if (!first) out << ",";
            out << u;
            first = false;
        }
        out << " keyfp=" << node.key.fingerprint() << "\n";
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
    return out.str();
}

void KeyTree::validate() const {
    if (!nodes_.count(root_)) throw InvariantViolation("missing root");
    if (at(root_).parent) throw InvariantViolation("root has a parent");

    std::size_t seen = 0;
    std::size_t users_seen = 0;
    std::deque<NodeId> queue{root_};
    while (!queue.empty()) {
        const NodeId id = queue.front();
        queue.pop_front();
        ++seen;
        const TreeNode& node = at(id);
        if (node.children.size() > static_cast<std::size_t>(degree_))
            throw InvariantViolation("degree limit exceeded");
        if (node.user) {
            ++users_seen;
            if (!node.children.empty()) throw InvariantViolation("user leaf with children");
            auto it = leaves_.find(*node.user);
            if (it == leaves_.end() || it->second != id)
                throw InvariantViolation("leaf map out of sync");
        }
        for (NodeId c : node.children) {
            if (!at(c).parent || *at(c).parent != id)
                throw InvariantViolation("child/parent pointers disagree");
            queue.push_back(c);
        }
    }
    if (seen != nodes_.size()) throw InvariantViolation("unreachable nodes");
    if (users_seen != leaves_.size()) throw InvariantViolation("leaf count mismatch");
}

}  // namespace gcs
