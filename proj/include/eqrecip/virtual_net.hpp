#pragma once

// Virtual queueing network for back-pressure scheduling of one multicast
// group. Nodes encode how far a packet has got; links carry the channel
// condition under which a transmission moves it one step closer to done.

#include <string>
#include <vector>

#include "eqrecip/channel.hpp"

namespace eqr {

/// Status nodes grow as 2^N and links as 3^N, so the network is kept small.
inline constexpr int kMaxVirtualUsers = 10;

enum class NodeKind { arrival, user, status, destination };

struct VirtualNode {
    NodeKind kind;
    int user = -1;           ///< user nodes only
    UserMask reception = 0;  ///< status nodes (and full mask for the destination)
};

enum class LinkKind {
    arrival_to_status,    ///< BS broadcast, reception pattern equals the state
    status_to_status,     ///< BS retransmission to the missing users
    arrival_to_user,      ///< BS broadcast handed to user i for local sharing
    user_to_destination,  ///< user i shares locally
};

struct VirtualLink {
    int upstream;
    int downstream;
    LinkKind kind;
    int user = -1;       ///< sharing user for arrival_to_user / user_to_destination
    UserMask care = 0;   ///< channels the condition looks at
    UserMask value = 0;  ///< required ON/OFF pattern on `care`

    bool is_on(const ChannelStateVector& s) const { return (s.bits() & care) == value; }
    bool local_sharing() const
    {
        return kind == LinkKind::arrival_to_user || kind == LinkKind::user_to_destination;
    }
};

class VirtualNetwork {
public:
    /// Throws std::invalid_argument unless 2 <= n <= kMaxVirtualUsers.
    static VirtualNetwork build(int n);

    int users() const { return users_; }
    const std::vector<VirtualNode>& nodes() const { return nodes_; }
    const std::vector<VirtualLink>& links() const { return links_; }

    int arrival() const { return 0; }
    int user_node(int i) const { return 1 + i; }
    /// Node reached with reception pattern r; the full pattern is the destination.
    int status_node(UserMask r) const { return users_ + static_cast<int>(r); }
    int destination() const { return status_node(full_mask(users_)); }

    /// Reception vector a node stands for (users that hold the packet in reality may differ).
    UserMask reception(int node) const { return nodes_[node].reception; }

    /// Ids of links whose ON-condition holds, in canonical (tie-break) order.
    std::vector<int> on_links(const ChannelStateVector& s) const;

    /// Link id from upstream to downstream, or -1.
    int find_link(int upstream, int downstream) const;

    std::string node_name(int node) const;

    /// One line per link: "<from> -> <to> [<condition>] <part>".
    std::string to_edge_list() const;

private:
    int users_ = 0;
    std::vector<VirtualNode> nodes_;
    std::vector<VirtualLink> links_;
};

}  // namespace eqr
