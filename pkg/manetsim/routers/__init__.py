# HTTP routers for the MANET simulator service
