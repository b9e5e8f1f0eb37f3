"""NMI against the number of layers at N=200, K=10."""
from _sweep import main

if __name__ == "__main__":
    main("vary_m", [1, 3, 5, 7, 9], n=200, k=10)
