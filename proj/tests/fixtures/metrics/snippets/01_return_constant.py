# target: f
def f():
    return 1
