#include "eqrecip/virtual_net.hpp"

#include <sstream>
#include <stdexcept>

namespace eqr {

namespace {

std::string vector_text(UserMask r, int n)
{
    std::string s = "(";
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            s += ',';
        }
        s += has_user(r, i) ? '1' : '0';
    }
    return s + ")";
}

}  // namespace

VirtualNetwork VirtualNetwork::build(int n)
{
    if (n < 2 || n > kMaxVirtualUsers) {
        throw std::invalid_argument("virtual network needs 2.." + std::to_string(kMaxVirtualUsers) +
                                    " users, got " + std::to_string(n));
    }
    VirtualNetwork net;
    net.users_ = n;
    const UserMask all = full_mask(n);

    net.nodes_.push_back({NodeKind::arrival, -1, 0});
    for (int i = 0; i < n; ++i) {
        net.nodes_.push_back({NodeKind::user, i, 0});
    }
    for (UserMask r = 1; r < all; ++r) {
        net.nodes_.push_back({NodeKind::status, -1, r});
    }
    net.nodes_.push_back({NodeKind::destination, -1, all});

    // canonical order: BS broadcasts into status nodes, retransmissions, then local sharing
    for (UserMask r = 1; r <= all; ++r) {
        net.links_.push_back({net.arrival(), net.status_node(r), LinkKind::arrival_to_status, -1, all, r});
    }
    for (UserMask r = 1; r < all; ++r) {
        const UserMask missing = all & ~r;
        for (UserMask next = r + 1; next <= all; ++next) {
            if ((next & r) != r) {
                continue;
            }
            net.links_.push_back({net.status_node(r), net.status_node(next), LinkKind::status_to_status,
                                  -1, missing, next & missing});
        }
    }
    for (int i = 0; i < n; ++i) {
        const UserMask bit = UserMask{1} << i;
        net.links_.push_back({net.arrival(), net.user_node(i), LinkKind::arrival_to_user, i, bit, bit});
    }
    for (int i = 0; i < n; ++i) {
        net.links_.push_back({net.user_node(i), net.destination(), LinkKind::user_to_destination, i, 0, 0});
    }
    return net;
}

std::vector<int> VirtualNetwork::on_links(const ChannelStateVector& s) const
{
    if (s.size() != users_) {
        throw std::invalid_argument("channel state length does not match the network");
    }
    std::vector<int> out;
    for (int l = 0; l < static_cast<int>(links_.size()); ++l) {
        if (links_[l].is_on(s)) {
            out.push_back(l);
        }
    }
    return out;
}

int VirtualNetwork::find_link(int upstream, int downstream) const
{
    for (int l = 0; l < static_cast<int>(links_.size()); ++l) {
        if (links_[l].upstream == upstream && links_[l].downstream == downstream) {
            return l;
        }
    }
    return -1;
}

std::string VirtualNetwork::node_name(int node) const
{
    const VirtualNode& v = nodes_.at(node);
    switch (v.kind) {
    case NodeKind::arrival: return "v_a";
    case NodeKind::user: return "v_" + std::to_string(v.user + 1);
    case NodeKind::status: return "v^" + vector_text(v.reception, users_);
    case NodeKind::destination: return "dest";
    }
    return "?";
}

std::string VirtualNetwork::to_edge_list() const
{
    std::ostringstream os;
    for (const auto& l : links_) {
        os << node_name(l.upstream) << " -> " << node_name(l.downstream) << " [";
        bool first = true;
        for (int i = 0; i < users_; ++i) {
            if (!has_user(l.care, i)) {
                continue;
            }
            if (!first) {
                os << ' ';
            }
            os << 's' << i + 1 << '=' << (has_user(l.value, i) ? 1 : 0);
            first = false;
        }
        if (first) {
            os << "always";
        }
        os << "] " << (l.local_sharing() ? "local" : "retransmission") << '\n';
    }
    return os.str();
}

}  // namespace eqr
