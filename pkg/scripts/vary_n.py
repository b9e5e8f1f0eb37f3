"""NMI against the number of nodes at K=10, M=5."""
from _sweep import main

if __name__ == "__main__":
    main("vary_n", [100, 200, 300, 400, 500, 600], k=10, m=5)
