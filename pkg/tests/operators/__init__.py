# Operators tests package initialization
