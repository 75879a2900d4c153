# Complementability tests package initialization
