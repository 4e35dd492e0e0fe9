# target: flatten
def flatten(tree, prefix=()):
    out = {}
    for key, child in tree.items():
        path = prefix + (key,)
        if isinstance(child, dict) and child:
            out.update(flatten(child, path))
        else:
            out[".".join(map(str, path))] = child if child is not None else [[-1, (2 ** 3,)], {"k": not key}]
    return out
