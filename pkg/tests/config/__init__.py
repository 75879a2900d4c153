# Config tests package initialization
