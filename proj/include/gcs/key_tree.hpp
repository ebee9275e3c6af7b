#pragma once

// Key tree in the style of Wong-Gouda-Lam key graphs: inner k-nodes hold
// keys, each user hangs off its own individual-key leaf. keyset(u) is the
// leaf-to-root path, userset(k) the leaves below k.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gcs/crypto.hpp"

namespace gcs {

struct TreeNode {
    SecretKey key;
    VersionedKeyId key_id;
    std::optional<NodeId> parent;  // nullopt at the root
    std::vector<NodeId> children;  // left-to-right
    std::optional<UserId> user;    // set on individual-key leaves
};

struct AttachResult {
    NodeId leaf = 0;        // new individual-key node
    NodeId parent = 0;      // node the leaf hangs off after the edit
    bool split = false;     // a full tree forced a leaf split
    NodeId moved_leaf = 0;  // the pre-existing leaf relocated under `parent`
};

struct DetachResult {
    VersionedKeyId removed_leaf_key;           // the departed user's individual key id
    NodeId leaving_point = 0;                  // first surviving ancestor; its key must change
    std::optional<VersionedKeyId> spliced_key; // key discarded with a spliced-out 1-child parent
};

class KeyTree {
  public:
    KeyTree() = default;

    // Balanced build over `members` in the given left-to-right order; every
    // node gets a fresh key. A single member yields root + one leaf.
    static KeyTree build(const std::vector<UserId>& members, int degree, std::size_t key_len,
                         DeterministicRng& rng);

    int degree() const { return degree_; }
    NodeId root() const { return root_; }
    bool empty_group() const { return leaves_.empty(); }
    std::size_t node_count() const { return nodes_.size(); }
    const std::map<NodeId, TreeNode>& nodes() const { return nodes_; }
    const TreeNode& at(NodeId id) const;
    bool has_user(const UserId& u) const { return leaves_.count(u) != 0; }
    NodeId leaf_of(const UserId& u) const;
    std::set<UserId> members() const;
    std::size_t member_count() const { return leaves_.size(); }
    // Longest root-to-leaf path, in edges.
    std::size_t height() const;

    std::vector<VersionedKeyId> keyset(const UserId& u) const;  // leaf-to-root
    std::set<UserId> userset(NodeId k) const;
    std::vector<NodeId> path_to_root(NodeId node) const;  // node-inclusive

    // Shallowest inner node with spare capacity, leftmost tie-break; when
    // every inner node is full, the shallowest-leftmost leaf (which attach()
    // will split into a parent for itself and the newcomer).
    NodeId find_joining_point() const;

    NodeId reserve_node_id() { return next_id_++; }
    AttachResult attach(NodeId joining_point, const UserId& u, HeldKey individual,
                        NodeId reserved_leaf);
    DetachResult detach(const UserId& u);

    VersionedKeyId install_fresh(NodeId node, SecretKey key);
    VersionedKeyId evolve(NodeId node, PrfMeter* meter = nullptr);

    // One line per node, preorder:
    //   node=<id> epoch=<e> parent=<id> users=<...> keyfp=<8-hex>
    std::string dump() const;

    // Throws InvariantViolation if the structure is malformed.
    void validate() const;

  private:
    NodeId new_node(std::optional<NodeId> parent);

    std::map<NodeId, TreeNode> nodes_;
    std::map<UserId, NodeId> leaves_;
    NodeId root_ = 0;
    int degree_ = 3;
    NodeId next_id_ = 1;
};

}  // namespace gcs
