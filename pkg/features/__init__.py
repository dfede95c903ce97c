# Features package initialization
