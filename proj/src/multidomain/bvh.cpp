#include <fervor/multidomain.hpp>

#include <algorithm>

namespace fervor {

Aabb elementBoundingBox(const Mesh& mesh, int element)
{
    Aabb box;
    for (int v : mesh.element(element))
        box.expand(mesh.vertex(v));
    return box;
}

BoundingBoxTree::BoundingBoxTree(const Mesh& mesh)
{
    const int n = mesh.numElements();
    boxes_.reserve(n);
    for (int e = 0; e < n; ++e)
        boxes_.push_back(elementBoundingBox(mesh, e));
    order_.resize(n);
    for (int e = 0; e < n; ++e)
        order_[e] = e;
    if (n > 0)
        nodes_.reserve(2*n);
    if (n > 0)
        build(0, n);
}

int BoundingBoxTree::build(int begin, int end)
{
    const int index = numNodes();
    nodes_.emplace_back();
    Aabb box;
    for (int i = begin; i < end; ++i)
        box.expand(boxes_[order_[i]]);
    nodes_[index].box = box;
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    if (end - begin <= maxLeafSize)
        return index;

    const Vec extent = box.upper - box.lower;
    int axis = 0;
    for (int d = 1; d < 3; ++d)
        if (extent[d] > extent[axis])
            axis = d;

    const auto key = [&](int e) { return boxes_[e].center()[axis]; };
    std::sort(order_.begin() + begin, order_.begin() + end, [&](int a, int b) {
        const double ka = key(a), kb = key(b);
        return ka < kb || (ka == kb && a < b);
    });
    const int mid = begin + (end - begin)/2;
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::vector<int> BoundingBoxTree::query(const Aabb& box) const
{
    std::vector<int> result;
    if (nodes_.empty() || box.empty())
        return result;
    std::vector<int> stack{0};
    while (!stack.empty())
    {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (!node.box.overlaps(box))
            continue;
        if (node.leaf())
        {
            for (int i = node.begin; i < node.end; ++i)
                if (boxes_[order_[i]].overlaps(box))
                    result.push_back(order_[i]);
            continue;
        }
        stack.push_back(node.right);
        stack.push_back(node.left);
    }
    std::sort(result.begin(), result.end());
    return result;
}

} // namespace fervor
