# Convergence tests package initialization
