# PDEs package initialization
