"""NMI against the number of communities at N=400, M=5."""
from _sweep import main

if __name__ == "__main__":
    main("vary_k", [6, 10, 14, 18, 22], n=400, m=5)
