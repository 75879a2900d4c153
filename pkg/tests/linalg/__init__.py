# Linalg tests package initialization
